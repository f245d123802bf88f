import math

import numpy as np
import pytest

from cryosync.commonlines import corrupt, true_common_lines
from cryosync.io import (
    TRACE_HEADER,
    config_from_text,
    config_to_text,
    fmt,
    parse_key_values,
    read_lines,
    read_rotations,
    read_trace,
    write_lines,
    write_rotations,
    write_trace,
)
from cryosync.so3 import sample_uniform_so3
from cryosync.solver import IterationTrace, SolverConfig


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(math.nan) == "" and fmt(None) == ""
    assert float(fmt(1 / 3)) == 1 / 3


class TestRotationFiles:
    def test_round_trip_is_lossless(self, tmp_path):
        r = sample_uniform_so3(17, 0)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_rotations(a, r)
        back = read_rotations(a)
        assert np.array_equal(back, r)
        write_rotations(b, back)
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "K=17" and len(lines[1].split()) == 9

    @pytest.mark.parametrize("text", ["3\n", "K=2\n1 0 0 0 1 0 0 0 1\n", "K=1\n1 0 0\n"])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(ValueError):
            read_rotations(path)


class TestLineFiles:
    def test_quantized_round_trip(self, tmp_path):
        lines = corrupt(true_common_lines(sample_uniform_so3(12, 1), 360), 0.5, 2)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_lines(a, lines)
        back = read_lines(a)
        assert back.k == 12 and back.n_theta == 360
        assert np.array_equal(back.bins, lines.bins)
        write_lines(b, back)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == "K=12 ntheta=360"

    def test_exact_round_trip(self, tmp_path):
        lines = true_common_lines(sample_uniform_so3(9, 3))
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_lines(a, lines)
        back = read_lines(a)
        assert back.n_theta is None
        assert np.array_equal(back.c_ij, lines.c_ij) and np.array_equal(back.c_ji, lines.c_ji)
        write_lines(b, back)
        assert a.read_bytes() == b.read_bytes()

    def test_pairs_in_any_order(self, tmp_path):
        lines = true_common_lines(sample_uniform_so3(6, 4), 360)
        path = tmp_path / "a.txt"
        write_lines(path, lines)
        head, *body = path.read_text().splitlines()
        path.write_text("\n".join([head] + body[::-1]) + "\n")
        assert np.array_equal(read_lines(path).bins, lines.bins)

    @pytest.mark.parametrize("text", [
        "K=3\n0 1 0 0\n0 2 0 0\n1 2 0 0\n",
        "K=3 ntheta=360\n0 1 0 0\n0 2 0 0\n",
        "K=3 ntheta=360\n1 0 0 0\n0 2 0 0\n1 2 0 0\n",
        "K=3 ntheta=360\n0 1 0 0\n0 1 0 0\n1 2 0 0\n",
        "K=3 ntheta=360\n0 1 0 400\n0 2 0 0\n1 2 0 0\n",
        "K=3 ntheta=360\n0 1 0\n0 2 0 0\n1 2 0 0\n",
    ])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(ValueError):
            read_lines(path)


class TestTraceFiles:
    def test_round_trip(self, tmp_path):
        tr = IterationTrace()
        tr.append(0, math.nan, 10.0, 0.5, math.nan, 0.0)
        tr.append(5, 0.1, 8.0, 0.25, 0.3, 0.01)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace(a, tr)
        text = a.read_text().splitlines()
        assert text[0] == TRACE_HEADER
        assert text[1] == "0,,10,0.5,,0"
        cols = read_trace(a)
        back = IterationTrace()
        for row in zip(*(cols[name] for name in TRACE_HEADER.split(","))):
            back.append(int(row[0]), *row[1:])
        write_trace(b, back)
        assert a.read_bytes() == b.read_bytes()


class TestConfigText:
    def test_round_trip(self):
        cfg = SolverConfig.for_method("bsgd", rho=0.1, step0=0.05, alpha=0.7, reshuffle=False)
        text = config_to_text(cfg)
        assert "method=bsgd" in text and "reshuffle=false" in text
        assert config_from_text(text) == cfg
        assert config_to_text(config_from_text(text)) == text

    def test_partial_file_overrides_base(self):
        cfg = config_from_text("# comment\nschedule = geometric\nbeta=0.9\n\nmax_iters=7\n")
        assert cfg.schedule == "geometric" and cfg.beta == 0.9 and cfg.max_iters == 7
        assert cfg.step0 == SolverConfig().step0
        assert config_from_text("alpha=none").alpha is None

    @pytest.mark.parametrize("text", ["bogus=1", "reshuffle=maybe", "max_iters"])
    def test_rejects_bad_text(self, text):
        with pytest.raises(ValueError):
            config_from_text(text)

    def test_key_values(self):
        assert parse_key_values("a=1\n b = x=y # c\n") == {"a": "1", "b": "x=y"}
