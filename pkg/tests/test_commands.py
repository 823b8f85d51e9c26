import json
import math
import os
from io import StringIO

from django.core.management import CommandError, call_command

import numpy as np
from PIL import Image

import pytest

from rsonerf.dataset import load_dataset
from rsonerf.exceptions import NonFiniteLoss
from rsonerf.fields import read_blob


TINY_GRID = ["--set", "hash_grid.levels=2", "--set", "hash_grid.table_size=256", "--set", "hash_grid.base_resolution=4"]
TINY_FIELD = TINY_GRID + ["--set", "field.hidden=[8, 8]", "--set", "field.direction_frequencies=1"]
QUICK = ["--steps", "2", "--eval-every", "2", "--rays", "32", "--samples", "8"]


def run(*args, **kwargs):
    stdout, stderr = StringIO(), StringIO()
    call_command(*args, stdout=stdout, stderr=stderr, **kwargs)
    return stdout.getvalue(), stderr.getvalue()


def assert_exit(returncode, *args):
    with pytest.raises(CommandError) as excinfo:
        run(*args)
    assert excinfo.value.returncode == returncode
    return str(excinfo.value)


@pytest.fixture
def checkpoint(tmp_path, dataset_dir):
    out = str(tmp_path / "ckpt")
    run("train", dataset_dir, "instant", "-o", out, *QUICK, *TINY_FIELD)
    return os.path.join(out, "final.ckpt")


class TestSynth:
    def test_orbit(self, tmp_path):
        out = str(tmp_path / "orbit")
        stdout, _ = run("synth", out, "--views", "4", "--size", "12x10", "--samples", "8")
        assert "Wrote 4 frames" in stdout
        assert sorted(os.listdir(out)) == ["transforms.json"] + ["view_%03d.png" % i for i in range(4)]
        data = load_dataset(out)
        assert (data.width, data.height) == (12, 10)
        assert not data.manifest.has_times

    def test_spin(self, tmp_path):
        out = str(tmp_path / "spin")
        run("synth", out, "--spin", "10", "--fps", "2", "--frames", "3", "--size", "12x10", "--samples", "8")
        data = load_dataset(out)
        np.testing.assert_allclose(data.manifest.times(), [0.0, 0.5, 1.0])

    def test_same_seed_same_bytes(self, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            run("synth", out, "--views", "2", "--size", "8x6", "--samples", "8", "--seed", "7")
            outputs.append(out)
        for file_name in os.listdir(outputs[0]):
            with open(os.path.join(outputs[0], file_name), "rb") as first:
                with open(os.path.join(outputs[1], file_name), "rb") as second:
                    assert first.read() == second.read()

    def test_green_screen_case(self, tmp_path):
        out = str(tmp_path / "case4")
        run("synth", out, "--case", "case4", "--frames", "2", "--size", "12x10", "--samples", "8", "--green-screen")
        with Image.open(os.path.join(out, "frame_000.png")) as image:
            assert image.mode == "RGB"
            corner = np.asarray(image)[0, 0]
        assert corner[1] > corner[0] and corner[1] > corner[2]

    def test_config_file(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"synth": {"views": 3, "width": 8, "height": 6, "samples": 8}}))
        out = str(tmp_path / "configured")
        run("synth", out, "--config", str(config), "--set", "synth.views=2")
        assert len(load_dataset(out)) == 2

    @pytest.mark.parametrize("args", (["--views", "1"], ["--case", "case9"], ["--set", "synth.colour=1"]))
    def test_invalid(self, tmp_path, args):
        assert_exit(2, "synth", str(tmp_path / "bad"), *args)
        assert not (tmp_path / "bad").exists()

    def test_radius_inside_the_cube(self, tmp_path):
        message = assert_exit(2, "synth", str(tmp_path / "bad"), "--radius", "0.5", "--views", "2", "--size", "4x4")
        assert "inside the scene cube" in message


class TestChroma:
    def test_keys_a_directory(self, tmp_path):
        source = tmp_path / "in"
        source.mkdir()
        image = np.zeros((6, 8, 3), dtype=np.uint8)
        image[..., 1] = 255
        image[2:4, 3:5] = (200, 40, 40)
        Image.fromarray(image).save(source / "frame.png")
        out = str(tmp_path / "out")
        stdout, _ = run("chroma", str(source), out, "--feather", "0")
        assert "Keyed 1 images" in stdout
        with Image.open(os.path.join(out, "frame.png")) as keyed:
            alpha = np.asarray(keyed)[..., 3]
        assert (alpha[2:4, 3:5] == 255).all()
        assert alpha.sum() == 4 * 255

    def test_empty_directory_warns(self, tmp_path):
        source = tmp_path / "in"
        source.mkdir()
        stdout, stderr = run("chroma", str(source), str(tmp_path / "out"))
        assert "No PNG images" in stderr
        assert "Keyed 0 images" in stdout

    def test_invalid_tolerance(self, tmp_path):
        assert_exit(2, "chroma", str(tmp_path), str(tmp_path / "out"), "--tolerance", "0")


class TestTrain:
    def test_writes_checkpoints(self, tmp_path, dataset_dir):
        out = str(tmp_path / "ckpt")
        stdout, _ = run("train", dataset_dir, "instant", "-o", out, *QUICK, *TINY_FIELD)
        assert "held-out psnr" in stdout
        assert sorted(os.listdir(out)) == ["final.ckpt", "history.jsonl", "step_000002.ckpt"]
        field, header = read_blob(os.path.join(out, "final.ckpt"))
        assert field.kind == "instant"
        assert header["step"] == 2
        assert header["train"]["rays_per_batch"] == 32
        assert field.options["hidden"] == (8, 8)

    def test_deformed_on_spin_data(self, tmp_path, spin_dataset_dir):
        out = str(tmp_path / "dnerf")
        run("train", spin_dataset_dir, "dnerf", "-o", out, *QUICK, *TINY_FIELD, "--set", "field.depth=2")
        field, _ = read_blob(os.path.join(out, "final.ckpt"))
        assert field.requires_time

    def test_time_needed(self, tmp_path, dataset_dir):
        message = assert_exit(2, "train", dataset_dir, "dnerf", "-o", str(tmp_path / "out"), *QUICK)
        assert "time" in message

    def test_unknown_kind(self, tmp_path, dataset_dir):
        message = assert_exit(2, "train", dataset_dir, "bogus", "-o", str(tmp_path / "out"))
        assert "Unknown field kind" in message

    def test_missing_dataset(self, tmp_path):
        assert_exit(2, "train", str(tmp_path / "missing"), "instant", "-o", str(tmp_path / "out"))

    def test_invalid_setting(self, tmp_path, dataset_dir):
        message = assert_exit(2, "train", dataset_dir, "instant", "-o", str(tmp_path / "out"), "--rays", "0")
        assert "train.rays_per_batch" in message

    def test_non_finite_loss_aborts(self, tmp_path, dataset_dir, monkeypatch):
        def diverging(*args, **kwargs):
            raise NonFiniteLoss(5, 0.01, math.inf)

        monkeypatch.setattr("rsonerf.management.commands.train.train_loop", diverging)
        message = assert_exit(3, "train", dataset_dir, "instant", "-o", str(tmp_path / "out"), *QUICK)
        assert "step 5" in message

    def test_same_seed_same_checkpoint(self, tmp_path, dataset_dir):
        blobs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            run("train", dataset_dir, "instant", "-o", out, "--seed", "7", *QUICK, *TINY_FIELD)
            with open(os.path.join(out, "final.ckpt"), "rb") as stream:
                blobs.append(stream.read())
        assert blobs[0] == blobs[1]


class TestEval:
    def test_report(self, tmp_path, checkpoint, dataset_dir):
        out = str(tmp_path / "report")
        stdout, _ = run("eval", checkpoint, dataset_dir, "--all", "-o", out, "--samples", "8")
        assert "Evaluated 4 views" in stdout
        assert sorted(os.listdir(out)) == ["report.jsonl", "report.txt"]
        with open(os.path.join(out, "report.jsonl")) as stream:
            records = [json.loads(line) for line in stream if line.strip()]
        assert [record["view_id"] for record in records[:4]] == ["view_%03d.png" % i for i in range(4)]

    def test_holdout_frames(self, checkpoint, dataset_dir):
        stdout, _ = run("eval", checkpoint, dataset_dir, "--holdout", "1,3", "--samples", "8")
        assert "view_001.png" in stdout
        assert "view_000.png" not in stdout
        assert "Evaluated 2 views" in stdout

    def test_lpips_file(self, tmp_path, checkpoint, dataset_dir):
        lpips = tmp_path / "lpips.txt"
        lpips.write_text("view_000 0.25\nview_001 0.15\n")
        stdout, _ = run("eval", checkpoint, dataset_dir, "--holdout", "0,1", "--lpips-file", str(lpips))
        assert "lpips" in stdout.splitlines()[0]
        assert "0.2000" in stdout

    def test_lpips_value_missing(self, tmp_path, checkpoint, dataset_dir):
        lpips = tmp_path / "lpips.txt"
        lpips.write_text("view_000 0.25\n")
        message = assert_exit(2, "eval", checkpoint, dataset_dir, "--holdout", "0,1", "--lpips-file", str(lpips))
        assert "view_001" in message

    def test_corrupt_checkpoint(self, tmp_path, dataset_dir):
        path = tmp_path / "broken.ckpt"
        path.write_bytes(b"not a checkpoint")
        assert_exit(2, "eval", str(path), dataset_dir)


class TestRender:
    def test_dataset_poses(self, tmp_path, checkpoint, dataset_dir):
        out = str(tmp_path / "render")
        stdout, _ = run("render", checkpoint, out, "--dataset", dataset_dir, "--frames", "0,2", "--samples", "8")
        assert "Rendered 2 images" in stdout
        assert sorted(os.listdir(out)) == ["view_000.png", "view_002.png"]
        with Image.open(os.path.join(out, "view_000.png")) as image:
            assert image.size == (14, 12)

    def test_grid_with_extras(self, tmp_path, checkpoint, dataset_dir):
        out = str(tmp_path / "grid")
        args = ["--dataset", dataset_dir, "--frames", "1", "--size", "6x5", "--samples", "4"]
        run("render", checkpoint, out, *args, "--grid", "--raw", "--opacity")
        names = set(os.listdir(out))
        assert {"view_001_grid_%d.png" % i for i in range(9)} <= names
        assert {"view_001_grid_%d.raw" % i for i in range(9)} <= names
        assert "view_001_grid_4_opacity.png" in names
        with Image.open(os.path.join(out, "view_001_contact_sheet.png")) as sheet:
            assert sheet.size == (18, 15)

    def test_orbit(self, tmp_path, checkpoint):
        out = str(tmp_path / "orbit")
        run("render", checkpoint, out, "--views", "2", "--size", "6x5", "--samples", "4")
        assert sorted(os.listdir(out)) == ["orbit_000.png", "orbit_001.png"]

    def test_invalid_time(self, tmp_path, checkpoint):
        assert_exit(2, "render", checkpoint, str(tmp_path / "out"), "--time", "2")


class TestBench:
    def test_table(self, dataset_dir):
        stdout, _ = run("bench", dataset_dir, "--kinds", "instant", "--target", "-100", *QUICK[:-2], *TINY_FIELD)
        lines = stdout.splitlines()
        assert lines[0].split() == ["kind", "device", "seconds", "reached", "psnr_db", "steps"]
        assert lines[1].startswith("instant")
        assert " yes " in lines[1]
        assert "Benchmarked 1 field kinds" in stdout

    def test_unknown_kind(self, dataset_dir):
        assert_exit(2, "bench", dataset_dir, "--kinds", "instant,bogus")
