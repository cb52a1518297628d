import json

import pytest

from bevlab import boxio, gridio
from bevlab.cli import EXIT_INPUT_PARSE, EXIT_OK, EXIT_OUTPUT_IO, main
from bevlab.geometry import BevGrid, Box3D, rasterize


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def box_record(frame="f0", category="car", x=0.0, y=0.0, z=10.0, l=4.0, w=2.0, h=1.5, yaw=0.0, score=None):
    rec = dict(frame=frame, category=category, x=x, y=y, z=z, l=l, w=w, h=h, yaw=yaw)
    if score is not None:
        rec["score"] = score
    return rec


class TestVariance:
    def test_l1_closed_form(self, capsys):
        assert main(["variance", "--loss", "l1", "--sigma", "1.0", "--samples", "10000"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "closed_form=1" in out
        assert "empirical=" in out

    def test_smooth_l1_has_no_closed_form(self, capsys):
        assert main(["variance", "--loss", "smooth_l1", "--sigma", "1.0", "--samples", "10000"]) == EXIT_OK
        line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("closed_form=")][0]
        assert line == "closed_form="  # no closed form for smooth L1

    def test_dice_requires_length(self):
        with pytest.raises(SystemExit) as exc:
            main(["variance", "--loss", "dice", "--sigma", "0.5"])
        assert exc.value.code == 2

    def test_deterministic_output_is_byte_identical(self, tmp_path, capsys):
        argv = [
            "variance", "--loss", "dice", "--length", "12", "--sigma", "0.5",
            "--samples", "10000", "--deterministic",
        ]
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        assert main(argv + ["--out", str(out_a)]) == EXIT_OK
        assert main(argv + ["--out", str(out_b)]) == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()
        text = out_a.read_text()
        assert text.startswith("# bevlab v")
        assert "# config:" in text

    def test_output_dir_missing_is_io_error(self, tmp_path, capsys):
        code = main(
            ["variance", "--loss", "l1", "--sigma", "1", "--samples", "1000",
             "--out", str(tmp_path / "no" / "dir" / "x.csv")]
        )
        assert code == EXIT_OUTPUT_IO


class TestThreshold:
    def test_length_four(self, capsys):
        assert main(["threshold", "--length", "4"]) == EXIT_OK
        out = capsys.readouterr().out
        sigma_c = float([l for l in out.splitlines() if l.startswith("sigma_c=")][0].split("=")[1])
        assert sigma_c == pytest.approx(0.25, abs=0.005)

    def test_length_twelve(self, capsys):
        assert main(["threshold", "--length", "12"]) == EXIT_OK
        out = capsys.readouterr().out
        sigma_m = float([l for l in out.splitlines() if l.startswith("sigma_m=")][0].split("=")[1])
        assert sigma_m == pytest.approx(0.0833, abs=0.002)


class TestSweep:
    def test_stdout_table(self, capsys):
        argv = [
            "sweep", "--lengths", "12", "--sigmas", "0.5,1.0", "--losses", "l1,dice",
            "--trials", "10", "--steps", "50", "--dim", "2",
        ]
        assert main(argv) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l]
        assert lines[0].startswith("loss,length,sigma")
        assert len(lines) == 1 + 4  # header + 2 losses x 1 length x 2 sigmas

    def test_csv_and_svg_output(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        argv = [
            "sweep", "--lengths", "12", "--sigmas", "0.2,0.8", "--losses", "l2,dice",
            "--trials", "5", "--steps", "20", "--dim", "2", "--format", "csv+svg",
            "--deterministic", "--out", str(out),
        ]
        assert main(argv) == EXIT_OK
        assert out.exists()
        svg = tmp_path / "sweep.svg"
        assert svg.exists()
        assert svg.read_text().startswith("<svg")
        data_rows = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
        assert len(data_rows) == 1 + 4


class TestSgd:
    def test_runs(self, capsys):
        argv = ["sgd", "--loss", "l2", "--sigma", "0.5", "--trials", "10", "--steps", "50", "--dim", "2"]
        assert main(argv) == EXIT_OK
        assert "mean_deviation_sq=" in capsys.readouterr().out


class TestTheorem1:
    def test_small_run(self, tmp_path, capsys):
        out = tmp_path / "thm.csv"
        argv = [
            "theorem1", "--length", "12", "--sigma", "0.5", "--seeds", "2",
            "--objects", "100", "--steps", "200", "--dim", "8",
            "--deterministic", "--out", str(out),
        ]
        assert main(argv) == EXIT_OK
        stdout = capsys.readouterr().out
        assert "dice win rate vs l1=" in stdout
        data_rows = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
        assert len(data_rows) == 1 + 3 * 2  # header + 3 losses x 2 seeds


class TestEval:
    def _write_pair(self, tmp_path):
        gts = [
            box_record(z=10.0),
            box_record(x=30.0, z=10.0),
        ]
        preds = [
            box_record(z=10.0, score=0.9),
            box_record(x=60.0, z=10.0, score=0.8),  # far from any GT
            box_record(x=30.0, z=10.0, score=0.7),
        ]
        pred_path = tmp_path / "pred.jsonl"
        gt_path = tmp_path / "gt.jsonl"
        write_jsonl(pred_path, preds)
        write_jsonl(gt_path, gts)
        return pred_path, gt_path

    def test_known_ap(self, tmp_path, capsys):
        pred_path, gt_path = self._write_pair(tmp_path)
        assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)]) == EXIT_OK
        out = capsys.readouterr().out
        # ranked TP, FP, TP with 2 GTs: AP = 0.5 + 0.5 * 2/3 = 5/6
        assert "mAP@0.5 = 0.833333333" in out
        assert "mAP@0.25 = 0.833333333" in out

    def test_csv_output_and_groups(self, tmp_path, capsys):
        pred_path, gt_path = self._write_pair(tmp_path)
        groups = tmp_path / "groups.csv"
        groups.write_text("car,small\n")
        out = tmp_path / "eval.csv"
        argv = [
            "eval", "--pred", str(pred_path), "--gt", str(gt_path),
            "--groups", str(groups), "--deterministic", "--out", str(out),
        ]
        assert main(argv) == EXIT_OK
        text = out.read_text()
        assert "# AP[small]@0.5 = 0.833333333" in text
        rows = [l.split(",") for l in text.splitlines() if l and not l.startswith("#")]
        header = rows[0]
        all_row = [r for r in rows[1:] if r[2] == "all" and r[1] == "0.5"][0]
        assert float(all_row[header.index("ap")]) == pytest.approx(5 / 6, abs=1e-9)

    def test_custom_bins(self, tmp_path, capsys):
        pred_path, gt_path = self._write_pair(tmp_path)
        assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path), "--bins", "0,3,6"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[3,6)" in out
        assert "[6,inf)" in out

    def test_missing_input(self, tmp_path):
        assert main(["eval", "--pred", str(tmp_path / "nope.jsonl"), "--gt", str(tmp_path / "gt.jsonl")]) == EXIT_INPUT_PARSE

    def test_malformed_jsonl(self, tmp_path):
        pred_path = tmp_path / "pred.jsonl"
        gt_path = tmp_path / "gt.jsonl"
        pred_path.write_text("{not json\n")
        write_jsonl(gt_path, [box_record()])
        assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)]) == EXIT_INPUT_PARSE

    def test_unscored_prediction(self, tmp_path):
        pred_path = tmp_path / "pred.jsonl"
        gt_path = tmp_path / "gt.jsonl"
        write_jsonl(pred_path, [box_record()])  # missing score
        write_jsonl(gt_path, [box_record()])
        assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)]) == EXIT_INPUT_PARSE


class TestNms:
    def test_round_trip(self, tmp_path, capsys):
        inp = tmp_path / "boxes.jsonl"
        out = tmp_path / "kept.jsonl"
        write_jsonl(
            inp,
            [
                box_record(score=0.9),
                box_record(x=2.0, score=0.7),  # duplicate within 4 m
                box_record(x=50.0, score=0.6),
                box_record(frame="f1", score=0.5),
            ],
        )
        assert main(["nms", "--input", str(inp), "--out", str(out)]) == EXIT_OK
        kept = boxio.read_box_lines(out)
        assert len(kept) == 3
        f0_scores = [b.score for f, b in kept if f == "f0"]
        assert f0_scores == [0.9, 0.6]

    def test_requires_out(self, tmp_path):
        inp = tmp_path / "boxes.jsonl"
        write_jsonl(inp, [box_record(score=0.9)])
        with pytest.raises(SystemExit) as exc:
            main(["nms", "--input", str(inp)])
        assert exc.value.code == 2

    def test_unscored_box_rejected(self, tmp_path):
        inp = tmp_path / "boxes.jsonl"
        write_jsonl(inp, [box_record()])
        assert main(["nms", "--input", str(inp), "--out", str(tmp_path / "o.jsonl")]) == EXIT_INPUT_PARSE


class TestRasterize:
    def test_grid_written(self, tmp_path, capsys):
        inp = tmp_path / "boxes.jsonl"
        out = tmp_path / "grid.bevg"
        write_jsonl(inp, [box_record(x=0.0, z=25.0, l=2.0, w=2.0)])
        argv = [
            "rasterize", "--input", str(inp), "--rows", "100", "--cols", "10",
            "--extent=-5,5,0,50", "--out", str(out),
        ]
        assert main(argv) == EXIT_OK
        grid = gridio.read_grid(out)
        assert grid.cells.shape == (100, 10)
        cell_area = grid.cell_width * grid.cell_depth
        assert grid.cells.sum() * cell_area == pytest.approx(4.0, rel=0.05)

    def test_bad_extent(self, tmp_path):
        inp = tmp_path / "boxes.jsonl"
        write_jsonl(inp, [box_record()])
        with pytest.raises(SystemExit) as exc:
            main(["rasterize", "--input", str(inp), "--rows", "10", "--cols", "10",
                  "--extent", "0,1,2", "--out", str(tmp_path / "g.bevg")])
        assert exc.value.code == 2


class TestSegIou:
    def test_manifest(self, tmp_path, capsys):
        grid = rasterize(
            [Box3D(x=0, y=0, z=25, l=2, w=2, h=1, yaw=0)],
            BevGrid(rows=100, cols=10, extent=(-5, 5, 0, 50)),
        )
        pred_path = tmp_path / "pred.bevg"
        gt_path = tmp_path / "gt.bevg"
        gridio.write_grid(grid, pred_path)
        gridio.write_grid(grid, gt_path)
        manifest = tmp_path / "pairs.csv"
        manifest.write_text(f"car,{pred_path},{gt_path}\n")
        assert main(["seg-iou", "--pairs", str(manifest)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "car" in out
        assert "mean_foreground=1" in out

    def test_bad_manifest_row(self, tmp_path):
        manifest = tmp_path / "pairs.csv"
        manifest.write_text("car,only_two_fields\n")
        assert main(["seg-iou", "--pairs", str(manifest)]) == EXIT_INPUT_PARSE

    def test_missing_grid(self, tmp_path):
        manifest = tmp_path / "pairs.csv"
        manifest.write_text(f"car,{tmp_path}/a.bevg,{tmp_path}/b.bevg\n")
        assert main(["seg-iou", "--pairs", str(manifest)]) == EXIT_INPUT_PARSE


class TestConfigFile:
    def test_config_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"samples": 2000, "seed": 9}))
        argv = ["variance", "--loss", "l1", "--sigma", "1", "--config", str(cfg)]
        assert main(argv) == EXIT_OK

    def test_explicit_flag_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"length": 4.0}))
        argv = [
            "threshold", "--config", str(cfg), "--length", "12",
        ]
        assert main(argv) == EXIT_OK
        out = capsys.readouterr().out
        assert "length=12" in out

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"smaples": 2000}))
        assert main(["variance", "--loss", "l1", "--sigma", "1", "--config", str(cfg)]) == 2

    def test_bad_json(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{oops")
        assert main(["variance", "--loss", "l1", "--sigma", "1", "--config", str(cfg)]) == EXIT_INPUT_PARSE


class TestFlagErrors:
    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["threshold", "--length", "4", "--bogus", "1"])
        assert exc.value.code == 2
