import csv
import os
import subprocess
import sys

import pytest

import csvgen
from plotviz import BOUND_LABEL, FigureSpec, render

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def spec_for(figure, csv_path, tmp_path, **kwargs):
    return FigureSpec(
        figure=figure,
        csv_path=csv_path,
        out_path=str(tmp_path / f"{figure}.{kwargs.pop('ext', 'png')}"),
        **kwargs,
    )


class TestScalingFigures:
    def test_fig3_has_five_series_with_dashed_bound(self, tmp_path):
        path = csvgen.write_summary(tmp_path, csvgen.scaling_rows())
        report = render(spec_for("fig3", path, tmp_path))
        labels = [s.label for s in report.series]
        assert len(labels) == 5
        assert set(labels) == set(csvgen.SCALING_POLICIES) | {BOUND_LABEL}
        (bound,) = [s for s in report.series if s.label == BOUND_LABEL]
        assert bound.dashed
        assert all(not s.dashed for s in report.series if s.label != BOUND_LABEL)
        with open(report.out_path, "rb") as fh:
            assert fh.read(8) == PNG_MAGIC

    def test_fig4_reads_same_summary_layout(self, tmp_path):
        rows = csvgen.scaling_rows(preset="fig4_hgg_scaling", ns=(20, 60, 100))
        path = csvgen.write_summary(tmp_path, rows, name="fig4_hgg_scaling_summary.csv")
        report = render(spec_for("fig4", path, tmp_path))
        assert len(report.series) == 5
        assert report.series[0].x == (20.0, 60.0, 100.0)

    def test_bound_series_optional(self, tmp_path):
        rows = [r for r in csvgen.scaling_rows() if r["policy"] != "bound"]
        path = csvgen.write_summary(tmp_path, rows)
        report = render(spec_for("fig3", path, tmp_path))
        assert len(report.series) == 4

    def test_mean_and_standard_error_over_seeds(self, tmp_path):
        rows = []
        for seed, value in ((0, 2.0), (1, 4.0)):
            rows.append(
                {"preset": "x", "policy": "max_aoi_first", "n": 50, "seed": seed,
                 "weighted_avg_aoi": value}
            )
        path = csvgen.write_summary(tmp_path, rows)
        report = render(spec_for("fig3", path, tmp_path))
        (series,) = report.series
        assert series.x == (50.0,)
        assert series.mean == (3.0,)
        assert series.se == (1.0,)

    def test_single_replicate_gets_zero_se(self, tmp_path):
        rows = [{"policy": "max_aoi_first", "n": 10, "seed": 0, "weighted_avg_aoi": 7.0}]
        path = csvgen.write_summary(tmp_path, rows)
        report = render(spec_for("fig3", path, tmp_path))
        assert report.series[0].se == (0.0,)


class TestModelAndTraceFigures:
    def test_fig5_one_series_per_policy_model_pair(self, tmp_path):
        path = csvgen.write_summary(
            tmp_path, csvgen.fig5_rows(), name="fig5_correlation_models_summary.csv"
        )
        report = render(spec_for("fig5", path, tmp_path))
        assert len(report.series) == 6
        assert "optimal_randomized / bernoulli" in [s.label for s in report.series]
        assert all(s.x == (0.1, 0.5) for s in report.series)

    def test_fig6_one_trace_per_policy(self, tmp_path):
        path = csvgen.write_timeseries(tmp_path, csvgen.fig6_rows())
        report = render(spec_for("fig6", path, tmp_path))
        assert len(report.series) == 3
        assert all(s.x == (100.0, 200.0, 300.0) for s in report.series)
        with open(report.out_path, "rb") as fh:
            assert fh.read(8) == PNG_MAGIC


class TestValidation:
    def test_unknown_figure_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown figure"):
            FigureSpec(figure="fig7", csv_path="x.csv", out_path=str(tmp_path / "y.png"))

    def test_missing_file_rejected(self, tmp_path):
        spec = spec_for("fig3", str(tmp_path / "absent.csv"), tmp_path)
        with pytest.raises(ValueError, match="not found"):
            render(spec)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["preset", "policy", "n", "seed"])
            writer.writerow(["fig3_rgg_scaling", "max_aoi_first", 20, 0])
        spec = spec_for("fig3", str(path), tmp_path)
        with pytest.raises(ValueError, match="weighted_avg_aoi"):
            render(spec)

    def test_header_only_rejected_and_nothing_written(self, tmp_path):
        path = csvgen.write_summary(tmp_path, [])
        spec = spec_for("fig3", path, tmp_path)
        with pytest.raises(ValueError, match="no data rows"):
            render(spec)
        assert not os.path.exists(spec.out_path)

    def test_only_bound_rows_rejected(self, tmp_path):
        rows = [r for r in csvgen.scaling_rows() if r["policy"] == "bound"]
        path = csvgen.write_summary(tmp_path, rows)
        with pytest.raises(ValueError, match="no policy rows"):
            render(spec_for("fig3", path, tmp_path))

    def test_low_dpi_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="dpi"):
            FigureSpec(figure="fig3", csv_path="x.csv", out_path="y.png", dpi=0)


class TestOutputFiles:
    @pytest.mark.parametrize("ext", ["png", "svg", "pdf"])
    def test_rerender_is_byte_identical(self, tmp_path, ext):
        path = csvgen.write_summary(tmp_path, csvgen.scaling_rows())
        spec = spec_for("fig3", path, tmp_path, ext=ext)
        render(spec)
        with open(spec.out_path, "rb") as fh:
            first = fh.read()
        render(spec)
        with open(spec.out_path, "rb") as fh:
            assert fh.read() == first

    def test_failed_render_keeps_previous_image(self, tmp_path):
        good = csvgen.write_summary(tmp_path, csvgen.scaling_rows())
        spec = spec_for("fig3", good, tmp_path)
        render(spec)
        with open(spec.out_path, "rb") as fh:
            before = fh.read()
        empty = csvgen.write_summary(tmp_path, [], name="empty_summary.csv")
        bad = FigureSpec(figure="fig3", csv_path=empty, out_path=spec.out_path)
        with pytest.raises(ValueError):
            render(bad)
        with open(spec.out_path, "rb") as fh:
            assert fh.read() == before
        assert not os.path.exists(spec.out_path + ".tmp")

    def test_overwrite_replaces_content(self, tmp_path):
        first = csvgen.write_summary(tmp_path, csvgen.scaling_rows())
        spec = spec_for("fig3", first, tmp_path)
        render(spec)
        with open(spec.out_path, "rb") as fh:
            before = fh.read()
        other = csvgen.write_summary(
            tmp_path, csvgen.scaling_rows(ns=(30, 90)), name="other_summary.csv"
        )
        render(FigureSpec(figure="fig3", csv_path=other, out_path=spec.out_path))
        with open(spec.out_path, "rb") as fh:
            assert fh.read() != before


def test_package_does_not_import_the_producer():
    code = "import plotviz, sys; raise SystemExit(1 if 'corraoi' in sys.modules else 0)"
    proc = subprocess.run([sys.executable, "-c", code])
    assert proc.returncode == 0
