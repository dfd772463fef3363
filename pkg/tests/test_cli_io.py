import json
import math
import struct
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scalar, random_vector
from micropolar.cli import main
from micropolar.config import (
    Config,
    ConfigError,
    apply_overrides,
    build_forcing,
    lcg_normal,
    lcg_uniform,
    parse_config,
    random_state_coeffs,
    single_mode,
)
from micropolar.io import (
    LEDGER_COLUMNS,
    TRACE_COLUMNS,
    SnapshotError,
    read_snapshot,
    write_report,
    write_snapshot,
)
from micropolar.solver import SolveTrace
from micropolar.spectral import SpectralVectorField, hermitian_defect, make_grid, sobolev_norm
from micropolar.verification import LIOUVILLE_TERMS, LedgerReport

SMALL = {"grid": {"n": 16, "L": 4.0}, "run": {"command": "solve", "output_dir": "out"}}


def _cfg_file(tmp_path, extra=None, name="cfg.json"):
    raw = json.loads(json.dumps(SMALL))
    for section, values in (extra or {}).items():
        raw.setdefault(section, {}).update(values)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def _run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(json.dumps(SMALL))
        assert isinstance(cfg, Config)
        assert (cfg.grid.n, cfg.grid.L) == (16, 4.0)
        p = cfg.params
        assert (p.kappa, p.damping, p.tol, p.lam) == (100.0, 0.5, 1e-10, 1.0)
        assert cfg.forcing.kind == "zero"
        assert cfg.to_dict()["params"]["lambda"] == 1.0

    def test_epsilon_zero(self):
        with pytest.raises(ConfigError, match=r"params\.epsilon: epsilon must be in \(0,1\]"):
            parse_config(json.dumps({**SMALL, "params": {"epsilon": 0}}))

    def test_single_mode_without_mode(self):
        with pytest.raises(ConfigError, match="missing key 'mode'") as info:
            parse_config(json.dumps({**SMALL, "forcing": {"kind": "single_mode"}}))
        assert info.value.path == "forcing.mode"

    @pytest.mark.parametrize(
        "raw, path",
        [
            ({"grid": {"n": 16, "L": 4.0, "m": 3}}, "grid.m"),
            ({"extra": {}}, "extra"),
            ({"params": {"lam": 0.5}}, "params.lam"),
            ({"grid": {"n": 15}}, "grid.n"),
            ({"params": {"R_cut": 7.0}}, "params.R_cut"),
            ({"params": {"lambda": 2}}, "params.lambda"),
            ({"params": {"kappa": "big"}}, "params.kappa"),
            ({"run": {"seed": -1}}, "run.seed"),
            ({"run": {"seed": 2**64}}, "run.seed"),
            ({"run": {"command": "plot"}}, "run.command"),
            ({"run": {"init": "snapshot"}}, "run.snapshot"),
            ({"run": {"snapshot": "/nonexistent.mps"}}, "run.snapshot"),
            ({"forcing": {"kind": "snapshot_file", "path": "/nonexistent.mps"}}, "forcing.path"),
            ({"forcing": {"kind": "single_mode", "mode": [9, 0, 0]}}, "forcing.mode"),
            ({"forcing": {"kind": "single_mode", "mode": [1, 0, 0], "amplitude": 1, "hm1_norm": 1}}, "forcing.amplitude"),
            ({"liouville": {"q": 5}}, "liouville.q"),
            ({"liouville": {"R_list": [1, 7]}}, "liouville.R_list[1]"),
            ({"sweep": {"epsilons": [0.25, 0.5]}}, "sweep.epsilons"),
        ],
    )
    def test_key_paths(self, raw, path):
        merged = json.loads(json.dumps(SMALL))
        for k, v in raw.items():
            merged.setdefault(k, {}).update(v)
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(merged))
        assert info.value.path == path
        assert str(info.value).startswith(path + ":")

    def test_invalid_json(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config("{")

    def test_overrides(self):
        cfg = parse_config(json.dumps(SMALL), ["params.epsilon=0.25", "run.output_dir=elsewhere"])
        assert cfg.params.epsilon == 0.25
        assert cfg.run.output_dir == "elsewhere"
        with pytest.raises(ConfigError):
            apply_overrides({}, ["epsilon"])
        with pytest.raises(ConfigError):
            apply_overrides({}, ["a.b.c=1"])

    def test_build_forcing(self):
        cfg = parse_config(json.dumps({**SMALL, "forcing": {"kind": "single_mode", "mode": [2, 0, 0], "hm1_norm": 1e-2}}))
        f, g = build_forcing(cfg, cfg.make_grid())
        assert sobolev_norm(f, -1) == pytest.approx(1e-2, rel=1e-12)
        assert sobolev_norm(g, 0) == 0.0
        cfg = parse_config(json.dumps({**SMALL, "forcing": {"kind": "gaussian_bump", "target": "both", "width": 1.0}}))
        f, g = build_forcing(cfg, cfg.make_grid())
        from micropolar.operators import differential

        assert sobolev_norm(differential(f, "divergence"), 0) < 1e-12 * sobolev_norm(f, 1)
        assert sobolev_norm(differential(g, "divergence"), 0) > 1e-3 * sobolev_norm(g, 1)


class TestRandomStream:
    def test_scalar_recurrence(self):
        s, ref = 7, []
        for _ in range(10):
            s = (6364136223846793005 * s + 1442695040888963407) % 2**64
            ref.append((s >> 11) * 2.0**-53)
        np.testing.assert_array_equal(lcg_uniform(7, 10), ref)

    def test_block_jump_matches_scalar(self):
        a = lcg_uniform(123, 10_000, block=4096)
        b = lcg_uniform(123, 10_000, block=7)
        np.testing.assert_array_equal(a, b)

    def test_first_values_frozen(self):
        # first state a*1 + c mod 2^64 = 7806831264735756412, >> 11 then * 2^-53
        assert lcg_uniform(1, 1)[0] == (7806831264735756412 >> 11) * 2.0**-53

    def test_normal_moments(self):
        z = lcg_normal(5, 200_000)
        assert abs(z.mean()) < 0.01
        assert z.std() == pytest.approx(1.0, abs=0.01)
        # Box-Muller on the first pair
        u1, u2 = lcg_uniform(5, 2)
        assert z[0] == pytest.approx(math.sqrt(-2 * math.log1p(-u1)) * math.cos(2 * math.pi * u2), rel=1e-15)

    def test_random_state(self):
        g = make_grid(16, 4.0)
        u, w = random_state_coeffs(g, 3, 1e-2)
        nu = sobolev_norm(SpectralVectorField(g, u), 1)
        nw = sobolev_norm(SpectralVectorField(g, w), 1)
        assert math.hypot(nu, nw) == pytest.approx(1e-2, rel=1e-12)
        u2, _ = random_state_coeffs(g, 3, 1e-2)
        np.testing.assert_array_equal(u, u2)
        assert not np.array_equal(u, random_state_coeffs(g, 4, 1e-2)[0])


class TestSnapshot:
    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_bitwise(self, seed):
        import tempfile
        from pathlib import Path

        g = make_grid(8, 1.7)
        fields = {"u": random_vector(g, seed).coeffs, "p": random_scalar(g, seed + 1).coeffs}
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "s.mps"
            write_snapshot(path, g, fields)
            snap = read_snapshot(path)
            raw = path.read_bytes()
        assert (snap.n, snap.L) == (8, 1.7)
        assert list(snap.fields) == ["u", "p"]
        for k in fields:
            assert snap.fields[k].tobytes() == np.ascontiguousarray(fields[k]).tobytes()
        assert raw[:4] == b"MPS1"
        assert len(raw) - (4 + 20 + (4 + 1 + 4) * 2) == 2 * 8 * 8**3 * 4

    def test_header_layout(self, tmp_path):
        g = make_grid(8, 2.0)
        write_snapshot(tmp_path / "s.mps", g, {"u": np.zeros((3, 8, 8, 8), complex)})
        raw = (tmp_path / "s.mps").read_bytes()
        assert struct.unpack("<IIdI", raw[4:24]) == (1, 8, 2.0, 1)
        assert struct.unpack("<I", raw[24:28]) == (1,)
        assert raw[28:29] == b"u"
        assert struct.unpack("<I", raw[29:33]) == (3,)

    def test_wrap_order(self, tmp_path):
        # index j maps to frequency j for j <= n/2 and j - n above
        g = make_grid(8, 1.0)
        c = np.zeros((8, 8, 8), complex)
        c[1, 0, 0], c[7, 0, 0] = 0.5j, -0.5j
        write_snapshot(tmp_path / "s.mps", g, {"p": c})
        payload = np.frombuffer((tmp_path / "s.mps").read_bytes()[-16 * 512:], "<c16").reshape(8, 8, 8)
        assert payload[1, 0, 0] == 0.5j and payload[7, 0, 0] == -0.5j

    def test_truncated(self, tmp_path):
        g = make_grid(8, 1.0)
        path = tmp_path / "s.mps"
        write_snapshot(path, g, {"u": random_vector(g, 1).coeffs})
        path.write_bytes(path.read_bytes()[:-10])
        expected = 2 * 8 * 8**3 * 3
        with pytest.raises(SnapshotError, match=f"truncated payload: expected {expected} bytes, found {expected - 10}"):
            read_snapshot(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "s.mps"
        write_snapshot(path, make_grid(8, 1.0), {"p": np.zeros((8, 8, 8), complex)})
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(SnapshotError, match="bad magic"):
            read_snapshot(path)

    def test_version(self, tmp_path):
        path = tmp_path / "s.mps"
        write_snapshot(path, make_grid(8, 1.0), {"p": np.zeros((8, 8, 8), complex)})
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(SnapshotError, match="version"):
            read_snapshot(path)

    def test_hermitian_violation(self, tmp_path):
        c = np.zeros((8, 8, 8), complex)
        c[1, 0, 0] = 1.0
        path = tmp_path / "s.mps"
        write_snapshot(path, make_grid(8, 1.0), {"p": c})
        with pytest.raises(SnapshotError, match="Hermitian"):
            read_snapshot(path)
        assert hermitian_defect(make_grid(8, 1.0), read_snapshot(path, check_hermitian=False).fields["p"]) > 0.1

    def test_header_truncated(self, tmp_path):
        path = tmp_path / "s.mps"
        path.write_bytes(b"MPS1\x01\x00")
        with pytest.raises(SnapshotError, match="corrupt header"):
            read_snapshot(path)


class TestReports:
    def test_empty_trace(self, tmp_path):
        write_report(tmp_path / "t.csv", SolveTrace())
        assert (tmp_path / "t.csv").read_text() == ",".join(TRACE_COLUMNS) + "\n"

    def test_one_iteration_trace(self, tmp_path):
        t = SolveTrace()
        for name in ("H1_u", "H1_w", "sqrtEps_H2_u", "sqrtEps_H2_w", "update_norm", "r_mom", "r_mic", "energy_gap"):
            getattr(t, name).append(0.1)
        write_report(tmp_path / "t.csv", t)
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert len(lines) == 2
        assert lines[1].split(",")[0] == "0"

    def test_ledger_cardinality(self, tmp_path):
        reps = [
            LedgerReport(1.0, 1.0, {k: float(i) for i, k in enumerate(LIOUVILLE_TERMS)}, {k: 2.0 for k in LIOUVILLE_TERMS}, R=R)
            for R in (1.0, 2.0, 4.0)
        ]
        write_report(tmp_path / "l.csv", reps)
        lines = (tmp_path / "l.csv").read_text().splitlines()
        assert lines[0] == ",".join(LEDGER_COLUMNS)
        assert len(lines) == 1 + 21
        assert lines[1] == "1.0,left,0.0,2.0"

    def test_json(self, tmp_path):
        write_report(tmp_path / "r.json", {"a": np.float64(1.5), "b": [np.int64(2)], "c": math.inf})
        assert json.loads((tmp_path / "r.json").read_text()) == {"a": 1.5, "b": [2], "c": "inf"}

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            write_report(tmp_path / "r.txt", {})


class TestCLI:
    def test_solve_zero(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path)
        out = tmp_path / "run"
        code, stdout, _ = _run(["solve", "--config", cfg, "--out", out], capsys)
        assert code == 0
        snap = read_snapshot(out / "solution.mps")
        assert set(snap.fields) == {"u", "omega", "p", "f", "g"}
        assert all(not np.any(v) for v in snap.fields.values())
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["params"]["kappa"] == 100.0
        assert manifest["status"]["exit_code"] == 0
        assert json.loads(stdout)["status"] == "ok"

    def test_verify_zero_snapshot(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path)
        _run(["solve", "--config", cfg, "--out", tmp_path / "a"], capsys)
        code, _, _ = _run(
            ["verify", "--config", cfg, "--out", tmp_path / "b", "--set", f"run.snapshot={tmp_path / 'a' / 'solution.mps'}"],
            capsys,
        )
        assert code == 0
        rep = json.loads((tmp_path / "b" / "verify.json").read_text())
        assert rep["energy_ledger"]["gap"] == 0.0
        assert rep["residuals_mollified"] == {"r_mom": 0.0, "r_mic": 0.0}
        assert rep["residuals_original"] == {"r_mom": 0.0, "r_mic": 0.0}
        assert rep["trilinear_nullity"] == {"advection_u": 0.0, "advection_omega": 0.0}
        assert rep["poisson_residual"] == 0.0

    def test_oversized_forcing_exit_2(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path, {"forcing": {"kind": "single_mode", "mode": [2, 0, 0], "hm1_norm": 1e7}})
        code, _, err = _run(["solve", "--config", cfg, "--out", tmp_path / "o"], capsys)
        assert code == 2
        diag = json.loads(err)
        assert diag["kind"] == "non_convergence"
        assert "blow-up" in diag["message"]
        assert json.loads((tmp_path / "o" / "diagnostic.json").read_text()) == diag

    def test_input_error_exit_1(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path, {"params": {"epsilon": 0}})
        code, _, err = _run(["solve", "--config", cfg, "--out", tmp_path / "o"], capsys)
        assert code == 1
        assert "params.epsilon" in json.loads(err)["message"]
        code, _, _ = _run(["solve", "--config", tmp_path / "missing.json"], capsys)
        assert code == 1

    def test_corrupt_snapshot_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.mps"
        bad.write_bytes(b"nope")
        cfg = _cfg_file(tmp_path)
        code, _, err = _run(["verify", "--config", cfg, "--out", tmp_path / "o", "--set", f"run.snapshot={bad}"], capsys)
        assert code == 1
        assert "bad magic" in json.loads(err)["message"]

    def test_deterministic_trace(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path, {"run": {"init": "random", "seed": 11, "init_norm": 1e-3}, "params": {"max_iters": 3}})
        traces = []
        for name in ("a", "b"):
            _run(["solve", "--config", cfg, "--out", tmp_path / name], capsys)
            traces.append((tmp_path / name / "trace.csv").read_bytes())
        assert traces[0] == traces[1]
        assert len(traces[0].splitlines()) == 5

    def test_liouville_gaussian(self, tmp_path, capsys):
        cfg = _cfg_file(tmp_path, {"liouville": {"source": "gaussian", "R_list": [1, 2, 3], "width": 1.0}, "grid": {"n": 32}})
        code, _, _ = _run(["liouville", "--config", cfg, "--out", tmp_path / "o"], capsys)
        assert code == 0
        lines = (tmp_path / "o" / "liouville_ledger.csv").read_text().splitlines()
        assert len(lines) == 22
        decay = (tmp_path / "o" / "decay.csv").read_text().splitlines()
        assert len(decay) == 1 + 3 * 5

    def test_sweep(self, tmp_path, capsys):
        forcing = {"kind": "single_mode", "mode": [2, 0, 0], "hm1_norm": 1e-2}
        cfg = _cfg_file(
            tmp_path,
            {"forcing": forcing, "params": {"damping": 1.0, "inner_rtol": 1e-6},
             "sweep": {"epsilons": [0.5, 0.25], "radii": [2.0], "lambdas": [0.5, 1.0]}},
        )
        code, _, _ = _run(["sweep", "--config", cfg, "--out", tmp_path / "o"], capsys)
        assert code == 0
        assert len((tmp_path / "o" / "continuation.csv").read_text().splitlines()) == 3
        assert len((tmp_path / "o" / "homotopy.csv").read_text().splitlines()) == 3

    def test_console_script(self, tmp_path):
        cfg = _cfg_file(tmp_path)
        proc = subprocess.run(
            [sys.executable, "-m", "micropolar.cli", "solve", "--config", str(cfg), "--out", str(tmp_path / "o")],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "o" / "trace.csv").exists()
