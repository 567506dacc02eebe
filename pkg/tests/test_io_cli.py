import json
import subprocess
import sys

import numpy as np
import pytest

from saabkit import cli, io
from saabkit.analysis import parse_curves_csv, parse_tables_csv
from saabkit.errors import (
    KernelDimensionError,
    KernelOrthonormalityError,
    KernelVersionError,
    ParseError,
)
from saabkit.residuals import synth_ar1
from saabkit.transforms import dct_kernel, klt_fit, saab_fit_multistage


@pytest.fixture(scope="module")
def kernels(ar1_4x4):
    x = ar1_4x4.blocks
    return [dct_kernel(4), saab_fit_multistage(x, (4,)), saab_fit_multistage(x, (2, 2)), klt_fit(x)]


class TestKernelFiles:
    def test_round_trip(self, kernels, tmp_path):
        for i, k in enumerate(kernels):
            path = tmp_path / f"k{i}.json"
            io.save_kernel(k, path)
            back = io.load_kernel(path)
            assert back.label == k.label and back.n == k.n
            if hasattr(k, "matrix"):
                assert np.abs(back.matrix - k.matrix).max() == 0.0
                np.testing.assert_array_equal(back.bias, k.bias)
                np.testing.assert_array_equal(back.energies, k.energies)
                assert back.plan == k.plan
            else:
                np.testing.assert_array_equal(back.basis, k.basis)
                np.testing.assert_array_equal(back.mean, k.mean)

    def test_text_layout(self, kernels):
        text = io.kernel_to_text(kernels[0], {"seed": 3})
        doc = json.loads(text)
        assert doc["format_version"] == 1 and doc["kind"] == "DCT" and doc["n"] == 4
        assert doc["training"]["seed"] == 3
        assert text.count("\n") > 16  # one matrix row per line

    def test_size_16(self, tmp_path):
        path = tmp_path / "d16.json"
        io.save_kernel(dct_kernel(16), path)
        assert path.stat().st_size < 2_000_000

    def test_truncated_matrix(self, kernels):
        doc = json.loads(io.kernel_to_text(kernels[1]))
        doc["matrix"] = doc["matrix"][:-1]
        with pytest.raises(KernelDimensionError):
            io.kernel_from_text(json.dumps(doc))
        doc = json.loads(io.kernel_to_text(kernels[1]))
        doc["matrix"][3] = doc["matrix"][3][:-2]
        with pytest.raises(KernelDimensionError):
            io.kernel_from_text(json.dumps(doc))

    def test_corrupted_row(self, kernels):
        doc = json.loads(io.kernel_to_text(kernels[2]))
        doc["matrix"][5] = [1.1 * v for v in doc["matrix"][5]]
        with pytest.raises(KernelOrthonormalityError):
            io.kernel_from_text(json.dumps(doc))

    def test_version_mismatch(self, kernels):
        doc = json.loads(io.kernel_to_text(kernels[0]))
        doc["format_version"] = 2
        with pytest.raises(KernelVersionError):
            io.kernel_from_text(json.dumps(doc))

    def test_not_json(self):
        with pytest.raises(ParseError):
            io.kernel_from_text('{"format_version": 1,')

    def test_distinct_error_types(self):
        errs = {KernelDimensionError, KernelOrthonormalityError, KernelVersionError}
        assert len(errs) == 3 and not any(issubclass(a, b) for a in errs for b in errs if a is not b)


class TestBlockFiles:
    def test_round_trip(self, tmp_path):
        bs = synth_ar1(0.9, 1.0, 4, 50, seed=1)
        io.save_blocks(bs, tmp_path / "b.sblk")
        back = io.load_blocks(tmp_path / "b.sblk")
        assert back.n == 4
        np.testing.assert_array_equal(back.blocks, bs.blocks)

    def test_header(self):
        data = io.blocks_to_bytes(np.zeros((3, 4)))
        assert data[:4] == b"SBLK" and len(data) == 20 + 3 * 4 * 8
        assert int.from_bytes(data[4:8], "little") == 1
        assert int.from_bytes(data[8:12], "little") == 2
        assert int.from_bytes(data[12:20], "little") == 3

    def test_bad_magic_and_length(self):
        data = io.blocks_to_bytes(np.zeros((3, 4)))
        with pytest.raises(ParseError):
            io.blocks_from_bytes(b"XXXX" + data[4:])
        with pytest.raises(ParseError) as ei:
            io.blocks_from_bytes(data[:-1])
        assert ei.value.offset == 20
        with pytest.raises(ParseError):
            io.blocks_from_bytes(data[:10])

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        io.atomic_write(tmp_path / "x.txt", "hello")
        assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


def run_ok(*argv):
    assert cli.run([str(a) for a in argv]) == 0


class TestCli:
    def test_gen_deterministic(self, tmp_path):
        a, b = tmp_path / "a.sblk", tmp_path / "b.sblk"
        run_ok("gen", "--n", 4, "--rho", 0.9, "--count", 1000, "--seed", 7, "--out", a)
        run_ok("gen", "--n", 4, "--rho", 0.9, "--count", 1000, "--seed", 7, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_fit_dct(self, tmp_path):
        run_ok("fit", "--kind", "dct", "--n", 8, "--out", tmp_path / "d.json")
        k = io.load_kernel(tmp_path / "d.json")
        np.testing.assert_array_equal(k.matrix, dct_kernel(8).matrix)
        assert (tmp_path / "d.trace.csv").read_text() == "stage,M,frobenius_diff\n"

    def test_end_to_end(self, tmp_path):
        blocks = tmp_path / "b.sblk"
        run_ok("gen", "--n", 4, "--rho", 0.95, "--count", 30000, "--seed", 1, "--out", blocks)
        for name, kind, plan in (("s.json", "saab", "2x2"), ("s1.json", "saab", "4"), ("k.json", "klt", None)):
            extra = ["--plan", plan] if plan else []
            run_ok("fit", "--kind", kind, "--in", blocks, "--out", tmp_path / name, "--seed", 1, *extra)
        run_ok("fit", "--kind", "dct", "--n", 4, "--out", tmp_path / "d.json")
        kflags = [f for name in ("s.json", "s1.json", "k.json", "d.json") for f in ("--kernel", tmp_path / name)]
        run_ok("curve", "--in", blocks, *kflags, "--out", tmp_path / "c.csv")
        curves = parse_curves_csv((tmp_path / "c.csv").read_text())
        assert [c.transform for c in curves] == ["DCT", "KLT", "SAAB[4x4]", "SAAB[2x2,2x2]"]
        for c in curves:
            assert np.all(np.diff(c.values) >= 0) and c.values[-1] == pytest.approx(100, abs=1e-9)
        run_ok("analyze", "--in", blocks, *kflags, "--out", tmp_path / "t.csv")
        tables = parse_tables_csv((tmp_path / "t.csv").read_text())
        assert tables["SAAB[2x2,2x2]"]["DC"] < tables["SAAB[4x4]"]["DC"]
        run_ok("viz", "--in", tmp_path / "s.json", "--columns", 8, "--out", tmp_path / "v.pgm")
        assert (tmp_path / "v.pgm").read_bytes().startswith(b"P5\n39 9\n255\n")
        run_ok("roundtrip", "--kernel", tmp_path / "s.json", "--in", blocks, "--out", tmp_path / "r.txt")
        err = float((tmp_path / "r.txt").read_text().split("max_abs_error ")[1])
        assert err < 1e-10
        run_ok("convergence", "--in", blocks, "--delta-m", 2000, "--out", tmp_path / "tr.csv")
        assert (tmp_path / "tr.csv").read_text().startswith("stage,M,frobenius_diff\n1,4000,")
        meta = io.load_kernel_meta(tmp_path / "s.json")
        assert meta["seed"] == 1 and meta["sample_count"] > 0

    def test_fit_reproducible(self, tmp_path):
        blocks = tmp_path / "b.sblk"
        run_ok("gen", "--n", 4, "--rho", 0.9, "--count", 20000, "--seed", 2, "--out", blocks)
        for out in ("x.json", "y.json"):
            run_ok("fit", "--kind", "saab", "--plan", "2x2", "--in", blocks, "--out", tmp_path / out)
        assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()
        assert (tmp_path / "x.trace.csv").read_bytes() == (tmp_path / "y.trace.csv").read_bytes()

    def test_extract(self, tmp_path):
        img = tmp_path / "p.pgm"
        img.write_bytes(b"P5\n17 17\n255\n" + bytes(range(17)) * 17)
        run_ok("extract", "--in", img, "--n", 4, "--mode", "horizontal", "--out", tmp_path / "e.sblk")
        bs = io.load_blocks(tmp_path / "e.sblk")
        assert len(bs) == 16
        np.testing.assert_allclose(bs.blocks[0].reshape(4, 4)[0], np.arange(1, 5) / 255)

    def test_usage_errors(self, tmp_path, capsys):
        assert cli.run(["fit", "--kind", "saab", "--out", str(tmp_path / "x.json")]) == 2
        assert "--in" in capsys.readouterr().err
        assert cli.run(["gen", "--n", "4", "--rho", "0.9", "--out", "x"]) == 2
        assert "--count" in capsys.readouterr().err
        assert cli.run(["frobnicate"]) == 2
        assert cli.run(["curve", "--in", "b", "--kernel", "k", "--out", "o", "--ordering", "best"]) == 2

    def test_runtime_errors(self, tmp_path, capsys):
        bad = tmp_path / "bad.sblk"
        bad.write_bytes(b"nonsense")
        assert cli.run(["convergence", "--in", str(bad), "--out", str(tmp_path / "o.csv")]) == 1
        assert "block file" in capsys.readouterr().err
        assert not (tmp_path / "o.csv").exists()
        assert cli.run(["roundtrip", "--kernel", str(tmp_path / "missing.json"), "--in", str(bad)]) == 1

    def test_zigzag_on_saab_is_runtime_error(self, tmp_path):
        blocks = tmp_path / "b.sblk"
        run_ok("gen", "--n", 4, "--rho", 0.9, "--count", 20000, "--seed", 3, "--out", blocks)
        run_ok("fit", "--kind", "saab", "--in", blocks, "--out", tmp_path / "s.json")
        assert cli.run(["curve", "--in", str(blocks), "--kernel", str(tmp_path / "s.json"),
                        "--ordering", "zigzag", "--out", str(tmp_path / "c.csv")]) == 1

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "d.json"
        proc = subprocess.run([sys.executable, "-m", "saabkit", "fit", "--kind", "dct", "--n", "2", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert io.load_kernel(out).n == 2
