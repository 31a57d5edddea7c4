from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hetrel.hetgraph import HeteroGraph

ACCEPTANCE_LINES: list[str] = []


def write_graph(tmp: Path, nodes, edges, name: str = "g") -> tuple[Path, Path]:
    """``nodes`` are (id, type, label) triples, ``edges`` (src, rel, dst)."""
    npath, epath = tmp / f"{name}.nodes.tsv", tmp / f"{name}.edges.tsv"
    npath.write_text("".join("\t".join(row) + "\n" for row in nodes))
    epath.write_text("".join("\t".join(row) + "\n" for row in edges))
    return npath, epath


@pytest.fixture
def triangle() -> HeteroGraph:
    # two types so the single-relation-per-pair triangle is a valid typed graph
    return HeteroGraph(
        [("a", "A"), ("b", "A"), ("c", "B")],
        [("a", "aa", "b"), ("a", "ab", "c"), ("b", "ab", "c")],
    )


@pytest.fixture
def path3() -> HeteroGraph:
    """a - b - c with b in the middle."""
    return HeteroGraph([("a", "A"), ("b", "B"), ("c", "A")], [("a", "ab", "b"), ("c", "ab", "b")])


@pytest.fixture
def biblio() -> HeteroGraph:
    """Authors a1, a2; a1 writes p1, a2 writes p1 and p2; papers carry a subject."""
    return HeteroGraph(
        [("a1", "A"), ("a2", "A"), ("p1", "P"), ("p2", "P"), ("s1", "S"), ("s2", "S")],
        [
            ("a1", "writes", "p1"),
            ("a2", "writes", "p1"),
            ("a2", "writes", "p2"),
            ("p1", "about", "s1"),
            ("p2", "about", "s2"),
        ],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
