import math

import pytest

from multiinterp import cli
from multiinterp import config as cfgmod
from multiinterp.errors import ConfigError
from multiinterp.experiments import SCHEMAS, block_rng
from multiinterp.report import Report, format_number

SMALL_BOYD = """\
experiment = boyd-indices
seed = 3

indices {
    count = 2
}

dilation first {
    count = 2
    points = 5
}
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def quiet(*args, **kwargs):
    pass


class TestParser:
    def test_blocks_and_defaults(self):
        cfg = cfgmod.load(SMALL_BOYD, SCHEMAS)
        assert cfg.experiment == "boyd-indices" and cfg.seed == 3 and cfg.jobs == 1
        assert [(b.kind, b.name) for b in cfg.blocks] == [("indices", "indices"), ("dilation", "first")]
        assert cfg.blocks[0].values["tol"] == 1e-2
        assert cfg.blocks[1].values["points"] == 5

    def test_split_keeps_parenthesised_commas(self):
        assert cfgmod.split_top("atom(0.5,0), atom(1,0)", ",") == ["atom(0.5,0)", "atom(1,0)"]

    def test_matrix_and_fractions(self):
        conv = cfgmod.convert(cfgmod.Value("1/2, inf; -inf, 3", 1), "matrix")
        assert conv == [[0.5, math.inf], [-math.inf, 3.0]]

    @pytest.mark.parametrize("text, line", [
        ("experiment = boyd-indices\nindices {\n    count = x\n}\n", 3),
        ("experiment = boyd-indices\nindices {\n    colour = 1\n}\n", 3),
        ("experiment = boyd-indices\nbogus {\n}\n", 2),
        ("experiment = boyd-indices\nindices {\n", 2),
        ("experiment = boyd-indices\n}\n", 2),
        ("experiment = boyd-indices\nindices {\n  dilation {\n", 3),
        ("experiment = boyd-indices\nseed = 1\nseed = 2\n", 3),
        ("experiment = nothing\n", 1),
        ("experiment = boyd-indices\nwhat is this\n", 2),
        ("experiment = boyd-indices\nseed = -1\nindices {\n}\n", 2),
    ])
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(ConfigError) as info:
            cfgmod.load(text, SCHEMAS)
        assert info.value.line == line

    def test_missing_experiment(self):
        with pytest.raises(ConfigError):
            cfgmod.load("seed = 1\n", SCHEMAS)

    def test_no_blocks(self):
        with pytest.raises(ConfigError):
            cfgmod.load("experiment = lorentz\n", SCHEMAS)

    def test_comments_ignored(self):
        cfg = cfgmod.load("# header\n" + SMALL_BOYD.replace("count = 2", "count = 2  # two"), SCHEMAS)
        assert cfg.blocks[0].values["count"] == 2

    @pytest.mark.parametrize("name", sorted(cli.DEFAULT_CONFIGS.values()) + ["reiteration.cfg"])
    def test_shipped_configs_parse(self, name):
        cli.load_config(cli.shipped_config(name))


class TestNumberFormat:
    @pytest.mark.parametrize("x, text", [
        (0.0, "0"), (1.0, "1"), (0.1, "0.1"), (123456.789, "123456.789"), (1e6, "1.00000000000e+06"),
        (2.5e-7, "2.50000000000e-07"), (1e-6, "1e-06"), (-3.0, "-3"), (math.inf, "inf"),
        (-math.inf, "-inf"), (math.nan, "nan"), (True, "true"), (7, "7"),
    ])
    def test_format(self, x, text):
        assert format_number(x) == text

    def test_twelve_significant_digits(self):
        assert format_number(math.pi) == "3.14159265359"

    def test_report_csv(self):
        rep = Report("demo")
        rep.add(0, 1.0, 2.0, 0.5, 1e-3, True)
        assert rep.to_csv() == ("check_name,instance_id,lhs,rhs,ratio,tolerance,pass\n"
                                "demo,0,1,2,0.5,0.001,true\n")


class TestBlockRng:
    def test_depends_on_seed_and_label(self):
        a = block_rng(1, "x").random()
        assert a == block_rng(1, "x").random()
        assert a != block_rng(2, "x").random()
        assert a != block_rng(1, "y").random()


class TestRun:
    def test_passing_run(self, tmp_path):
        path = write(tmp_path, SMALL_BOYD)
        out = tmp_path / "out"
        assert cli.run(overrides=["--config", str(path), "--out", str(out)], log=quiet) == cli.EXIT_OK
        for name in ("indices", "first"):
            header = (out / f"{name}.csv").read_text().splitlines()[0]
            assert header == "check_name,instance_id,lhs,rhs,ratio,tolerance,pass"

    def test_failing_check_exits_one(self, tmp_path):
        # a tolerance of zero cannot be met by the numeric index estimate
        path = write(tmp_path, SMALL_BOYD.replace("count = 2\n}\n\ndilation", "count = 2\n    tol = 0\n}\n\ndilation"))
        lines = []
        status = cli.run(overrides=["--config", str(path), "--out", str(tmp_path / "o")],
                         log=lambda *a, **k: lines.append(a[0]))
        assert status == cli.EXIT_FAIL
        assert any(line.startswith("FAILED: indices") for line in lines)

    def test_parse_error_exits_two(self, tmp_path):
        path = write(tmp_path, "experiment = boyd-indices\nindices {\n    count = two\n}\n")
        lines = []
        status = cli.run(overrides=["--config", str(path)], log=lambda *a, **k: lines.append(a[0]))
        assert status == cli.EXIT_USAGE
        assert "line 3" in lines[-1]

    def test_reiteration_precondition_exits_two(self, tmp_path):
        text = ("experiment = verify-structural\nreiteration {\n    points = 0.3; 0.6; 0.5\n"
                "    lambdas = 0.6, 0.5\n}\n")
        path = write(tmp_path, text)
        assert cli.run(overrides=["--config", str(path), "--out", str(tmp_path / "o")], log=quiet) == cli.EXIT_USAGE

    def test_missing_file_exits_two(self, tmp_path):
        assert cli.run(overrides=["--config", str(tmp_path / "none.cfg")], log=quiet) == cli.EXIT_USAGE

    def test_unknown_flag_exits_two(self, capsys):
        assert cli.run(overrides=["--colour"], log=quiet) == cli.EXIT_USAGE

    def test_needs_config_or_experiment(self):
        assert cli.run(overrides=[], log=quiet) == cli.EXIT_USAGE

    def test_experiment_mismatch(self):
        path = cli.shipped_config("lorentz.cfg")
        assert cli.run(overrides=["run", "boyd-indices", "--config", str(path)], log=quiet) == cli.EXIT_USAGE

    @pytest.mark.parametrize("flag, value", [("--seed", "-4"), ("--jobs", "0"), ("--tolerance-scale", "0")])
    def test_bad_overrides(self, tmp_path, flag, value):
        path = write(tmp_path, SMALL_BOYD)
        assert cli.run(overrides=["--config", str(path), flag, value], log=quiet) == cli.EXIT_USAGE

    def test_seed_override_changes_output(self, tmp_path):
        path = write(tmp_path, SMALL_BOYD)
        cli.run(overrides=["--config", str(path), "--out", str(tmp_path / "a")], log=quiet)
        cli.run(overrides=["--config", str(path), "--out", str(tmp_path / "b"), "--seed", "4"], log=quiet)
        assert (tmp_path / "a" / "indices.csv").read_bytes() != (tmp_path / "b" / "indices.csv").read_bytes()

    def test_tolerance_scale_is_applied(self, tmp_path):
        path = write(tmp_path, SMALL_BOYD)
        cli.run(overrides=["--config", str(path), "--out", str(tmp_path / "a"), "--tolerance-scale", "2"],
                log=quiet)
        row = (tmp_path / "a" / "indices.csv").read_text().splitlines()[1].split(",")
        assert row[5] == "0.02"

    def test_identical_across_reruns_and_workers(self, tmp_path):
        path = write(tmp_path, SMALL_BOYD)
        for out, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
            assert cli.run(overrides=["--config", str(path), "--out", str(tmp_path / out), "--jobs", jobs],
                           log=quiet) == cli.EXIT_OK
        for name in ("indices.csv", "first.csv"):
            ref = (tmp_path / "a" / name).read_bytes()
            assert (tmp_path / "b" / name).read_bytes() == ref
            assert (tmp_path / "c" / name).read_bytes() == ref

    def test_main_entry(self, tmp_path, capsys):
        path = write(tmp_path, SMALL_BOYD)
        assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
        assert "PASS indices" in capsys.readouterr().out
