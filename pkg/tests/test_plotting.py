import re

import numpy as np
import pytest

from obsbandit import plotting
from obsbandit.errors import SchemaError
from obsbandit.harness import ExperimentConfig, run_sweep, summarize_final, summary_csv, traces_csv


@pytest.fixture(scope="module")
def csvs(tmp_path_factory):
    d = tmp_path_factory.mktemp("plots")
    res = run_sweep(ExperimentConfig(n_arms=[2, 3], d_y=[2], d_x=3, horizon=700, repetitions=2))
    (d / "traces.csv").write_text(traces_csv(res))
    (d / "summary.csv").write_text(summary_csv(summarize_final(res, 700)))
    return d / "traces.csv", d / "summary.csv"


class TestReaders:
    def test_round_trip(self, csvs):
        series = plotting.read_traces(csvs[0])
        assert [(s.n_arms, s.d_y) for s in series] == [(2, 2), (3, 2)]
        assert series[0].t[0] == 2 and series[0].t[-1] == 700
        label, rows = plotting.read_summary(csvs[1])
        assert label == "p90" and len(rows) == 2

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "a,b,c\n1,2,3\n",
            "N,d_y,t,mean_regret,worst_regret,p90_regret,mean_normalized,worst_normalized\n",
            "N,d_y,t,mean_regret,worst_regret,p90_regret,mean_normalized,worst_normalized\n1,2,3\n",
            "N,d_y,t,mean_regret,worst_regret,p90_regret,mean_normalized,worst_normalized\n1,2,3,0,0,0,x,0\n",
        ],
    )
    def test_malformed_traces(self, tmp_path, text):
        p = tmp_path / "t.csv"
        p.write_text(text)
        with pytest.raises(SchemaError):
            plotting.read_traces(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            plotting.read_summary(tmp_path / "nope.csv")


class TestFigures:
    def test_normalized_structure(self, csvs):
        svg = plotting.figure_normalized(plotting.read_traces(csvs[0]), "note")
        assert svg.startswith("<svg") and svg.endswith("</svg>\n")
        lines = re.findall(r"<polyline[^>]*>", svg)
        assert len(lines) == 4
        assert sum('stroke-dasharray="5,3"' in l for l in lines) == 2
        for l in lines:
            assert len(re.search(r'points="([^"]*)"', l).group(1).split()) <= plotting.MAX_POINTS

    def test_final_bars(self, csvs):
        label, rows = plotting.read_summary(csvs[1])
        svg = plotting.figure_final(rows, label)
        assert svg.count("<rect") == 1 + 3 * 2 + 3  # background, bars, legend swatches
        assert ">p90<" in svg and ">Worst<" in svg

    def test_deterministic(self, csvs):
        s = plotting.read_traces(csvs[0])
        assert plotting.figure_normalized(s, "x") == plotting.figure_normalized(s, "x")

    def test_single_point_series(self):
        s = plotting.CellSeries(2, 2, np.array([2.0]), np.array([1.0]), np.array([1.0]))
        assert "<polyline" in plotting.figure_normalized([s])

    def test_empty(self):
        with pytest.raises(SchemaError):
            plotting.figure_normalized([])
        with pytest.raises(SchemaError):
            plotting.figure_final([])
