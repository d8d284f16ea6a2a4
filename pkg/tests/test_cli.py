import io
import json
import subprocess
import sys

import pytest

from priorqec.cli import RunConfig, execute, main, parse_config


def run_cli(args, env=None):
    return subprocess.run([sys.executable, "-m", "priorqec", *args], capture_output=True, text=True, env=env)


def body(text: str) -> str:
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("# priorqec "))


class TestParse:
    def test_sweep_flags(self):
        cfg = parse_config("sweep --code rotated --d 4 --cases 1,2,3 --eps 1e-3,1e-2 --p-star 0.333 --seed 7".split())
        assert (cfg.command, cfg.code, cfg.d, cfg.cases, cfg.eps, cfg.p_star, cfg.seed) == (
            "sweep", "rotated", 4, (1, 2, 3), (1e-3, 1e-2), 0.333, 7)

    @pytest.mark.parametrize("argv", [
        "sweep --d 1", "sweep --eps 0.6,0.1", "sweep --eps 1e-3", "sweep --bad-site 16",
        "learn --gamma 0", "calibrate --theta-target 3.2", "sweep --code toric", "lemma --known-sites 30",
        "calibrate --rounds 100 --window 50,200", "sweep --format xml", "sweep --cases 7",
    ])
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_config(argv.split())
        assert exc.value.code == 2

    def test_flag_overrides_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"gamma": 0.01, "rounds": 10, "p-star": 0.2}))
        cfg = parse_config(["learn", "--config", str(path), "--gamma", "0.05"])
        assert cfg.gamma == 0.05 and cfg.rounds == 10 and cfg.p_star == 0.2

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"gamma": 0.01, "colour": "red"}))
        with pytest.raises(SystemExit):
            parse_config(["learn", "--config", str(path)])

    def test_key_for_other_command_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"theta0": 0.1}))
        with pytest.raises(SystemExit):
            parse_config(["sweep", "--config", str(path)])

    def test_seed_env(self, monkeypatch):
        monkeypatch.setenv("PRIORQEC_SEED", "11")
        assert parse_config(["sweep"]).seed == 11
        assert parse_config(["sweep", "--seed", "3"]).seed == 3

    def test_command_defaults(self):
        cfg = parse_config(["calibrate"])
        assert cfg.code == "unrotated" and cfg.rounds == 4000


class TestExecute:
    def test_code_info(self, capsys):
        assert main(["code-info", "--code", "rotated", "--d", "3"]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["n"] == 9 and info["check_weights"]["hz"] == {"2": 2, "4": 2}
        assert info["min_logical_weight"] == 3

    def test_sweep_csv(self):
        out = io.StringIO()
        cfg = parse_config("sweep --d 3 --cases 1,3 --eps 1e-3,1e-2 --seed 5".split())
        assert execute(cfg, out) == 0
        lines = out.getvalue().splitlines()
        assert lines[0].startswith("# priorqec ")
        assert json.loads(lines[0][len("# priorqec "):])["seed"] == 5
        assert lines[2] == "code,d,case,epsilon,failure,tail,seed"
        assert lines[3].startswith("rotated,3,identical_qubits,0.001,")
        assert "code,d,case,exponent,intercept,residual" in lines
        fit = [ln for ln in lines if ln.startswith("rotated,3,known_bad_qubit,") and ln.count(",") == 5]
        assert abs(float(fit[0].split(",")[3]) - 1.0) < 0.25

    def test_repeat_from_header_is_byte_identical(self, tmp_path):
        first = tmp_path / "a.csv"
        assert main(["sweep", "--d", "3", "--eps", "1e-3,5e-3", "--seed", "2", "--output", str(first)]) == 0
        header = json.loads(first.read_text().splitlines()[0][len("# priorqec "):])
        settings = {k: v for k, v in header.items() if k not in ("command", "version", "config_file", "output")}
        cfg_file = tmp_path / "again.json"
        cfg_file.write_text(json.dumps(settings))
        second = tmp_path / "b.csv"
        assert main(["sweep", "--config", str(cfg_file), "--output", str(second)]) == 0
        assert body(first.read_text()) == body(second.read_text())

    def test_jsonl(self):
        out = io.StringIO()
        assert execute(parse_config("lemma --d 4 --format jsonl".split()), out) == 0
        rows = [json.loads(x) for x in out.getvalue().splitlines()]
        assert rows[0]["type"] == "provenance"
        by_prior = {r["priors"]: r for r in rows[1:]}
        assert by_prior["informed"]["passed"] is True
        assert by_prior["uniform"]["passed"] is False

    def test_learn_and_calibrate_short(self):
        out = io.StringIO()
        assert execute(parse_config("learn --rounds 50 --eps 1e-3,1e-2".split()), out) == 0
        assert "# priors" in out.getvalue() and "learned_priors" in out.getvalue()
        out = io.StringIO()
        assert execute(parse_config("calibrate --rounds 60 --eps 1e-3,1e-2".split()), out) == 0
        text = out.getvalue()
        assert "round,theta,theta_tot,b_t,prior_target,prior_median_others" in text
        assert "# convergence" in text

    def test_module_error_exit_status(self, capsys):
        cfg = RunConfig(command="lemma", d=3)
        assert execute(cfg, io.StringIO()) == 1
        assert "experiments" in capsys.readouterr().err


def test_entry_point_process():
    ok = run_cli(["code-info", "--d", "2"])
    assert ok.returncode == 0 and json.loads(ok.stdout)["n"] == 4
    bad = run_cli(["sweep", "--d", "1"])
    assert bad.returncode == 2 and "d must be >= 2" in bad.stderr
    failed = run_cli(["lemma", "--d", "3"])
    assert failed.returncode == 1
