import csv
import io
import json
import subprocess
import sys

import pytest

from brwmartin.chains import DriftedLine, Lattice3D, RegularTree
from brwmartin.cli import RunRecord, format_config, main, parse_config, parse_output
from brwmartin.errors import ConfigError
from brwmartin.experiments import SUITES, default_config
from brwmartin.offspring import binomial, deterministic, poisson

KS_SMALL = """\
# small Kesten-Stigum run
chain.kind = regular_tree
chain.degree = 3
offspring.family = table
offspring.pmf = "0:0.25,2:0.75"
run.suite = kesten_stigum
run.generations = 8
run.replicas = 60
"""


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ------------------------------------------------------------------- config


def test_parse_tree_chain():
    cfg = parse_config("chain.kind = regular_tree\nchain.degree = 3\n")
    assert cfg.chain == RegularTree(3)


def test_parse_table_pmf():
    cfg = parse_config('offspring.family = table\noffspring.pmf = "0:0.25,2:0.75"\n')
    assert cfg.offspring.mean == 1.5
    assert dict(zip(cfg.offspring.values, cfg.offspring.probs)) == {0: 0.25, 2: 0.75}


def test_degree_two_rejected_with_key_and_line():
    with pytest.raises(ConfigError) as info:
        parse_config("# tree\nchain.kind = regular_tree\nchain.degree = 2\n")
    assert info.value.key == "chain.degree" and info.value.line == 3


@pytest.mark.parametrize("text,key,line", [
    ("chain.kind = regular_tree\nchain.degre = 3\n", "chain.degre", 2),
    ("run.seed = 1\nrun.seed = 2\n", "run.seed", 2),
    ("run.replicas = many\n", "run.replicas", 1),
    ("chain.kind = drifted_line\nchain.p = 0.4\n", "chain.p", 2),
    ("chain.kind = lattice3d\nchain.degree = 3\n", "chain.degree", 2),
    ("output.path = x\n", "output.path", 1),
    ("run.suite = nope\n", "run.suite", 1),
    ("offspring.family = binomial\noffspring.n = 3\n", "offspring.p", 1),
    ("run.seed = -1\n", "run.seed", 1),
])
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert info.value.line == line
    assert key in str(info.value)


def test_malformed_line():
    with pytest.raises(ConfigError) as info:
        parse_config("chain.kind regular_tree\n")
    assert info.value.line == 1


def test_suite_defaults_fill_in():
    cfg = parse_config("run.suite = support\nrun.replicas = 100\n")
    assert cfg.chain == DriftedLine(0.9) and cfg.replicas == 100
    assert cfg == default_config("support", replicas=100)


def test_output_section():
    assert parse_output("output.dir = runs/x  # comment\n") == {"dir": "runs/x"}


@pytest.mark.parametrize("cfg", [
    default_config(name) for name in sorted(SUITES)
] + [
    default_config("kesten_stigum", chain=DriftedLine(2 / 3), offspring=poisson(1.3), resolution=None),
    default_config("kesten_stigum", chain=Lattice3D(), offspring=binomial(16, 1 / 6), ray=(1, 0, 1)),
    default_config("kesten_stigum", offspring=deterministic(3), tolerance=2.5),
], ids=lambda c: f"{c.suite}-{c.chain}")
def test_format_parse_round_trip(cfg):
    text = format_config(cfg)
    assert parse_config(text) == cfg
    assert format_config(parse_config(text)) == text


# ----------------------------------------------------------------- commands


def test_potential_green_exact():
    code, out, _ = run_cli("potential", "green", "--chain", "regular_tree:3", "--x", "root", "--y", "root",
                           "--walks", "2000", "--horizon", "100")
    assert code == 0
    assert "exact 2.0" in out.splitlines()[0]


def test_potential_kernel_and_measure():
    code, out, _ = run_cli("potential", "kernel", "--chain", "drifted_line:2/3", "--x", "2", "--y=-inf")
    assert code == 0 and "exact 0.25" in out
    code, out, _ = run_cli("potential", "measure", "--chain", "regular_tree:3", "--cylinder", "1.0",
                           "--walks", "2000")
    assert code == 0 and "exact 0.1666666666666666" in out
    code, out, _ = run_cli("potential", "kernel", "--chain", "lattice3d", "--x", "1,0,0", "--y", "inf")
    assert code == 0 and "exact 1.0" in out and "monte-carlo n/a" in out


def test_simulate_writes_csv_and_record(tmp_path):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text(KS_SMALL)
    code, out, err = run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / "run"), "--seed", "5")
    assert code == 0 and err == ""
    rows = read_csv(tmp_path / "run" / "simulation.csv")
    assert len(rows) == 60 * 9 + 1
    assert rows[0][:4] == ["n", "replica", "total", "W_n"]
    rec = RunRecord.from_json((tmp_path / "run" / "run_record.json").read_text())
    assert rec.schema == 1 and rec.seed == 5 and len(rec.digests) == 60
    assert "run.seed = 5" in rec.config


def test_simulate_is_deterministic(tmp_path):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text(KS_SMALL)
    for name in ("a", "b"):
        assert run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / name))[0] == 0
    a = (tmp_path / "a" / "simulation.csv").read_bytes()
    assert a == (tmp_path / "b" / "simulation.csv").read_bytes()
    ra = json.loads((tmp_path / "a" / "run_record.json").read_text())
    rb = json.loads((tmp_path / "b" / "run_record.json").read_text())
    assert ra["digests"] == rb["digests"]


def test_simulate_warns_when_not_supercritical(tmp_path):
    cfg = tmp_path / "sub.cfg"
    cfg.write_text("chain.kind = regular_tree\nchain.degree = 3\n"
                   'offspring.pmf = "0:0.5,2:0.5"\nrun.generations = 5\nrun.replicas = 10\n')
    code, _, err = run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    assert err.startswith("warning:") and "supercritical" in err


def test_verify_pass_and_replay(tmp_path):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text(KS_SMALL.replace("run.replicas = 60", "run.replicas = 300"))
    code, out, _ = run_cli("verify", "kesten_stigum", "--config", str(cfg), "--out", str(tmp_path / "v"))
    assert code == 0 and "PASS" in out
    verdict = json.loads((tmp_path / "v" / "kesten_stigum_verdict.json").read_text())
    assert verdict["passed"] is True
    record = tmp_path / "v" / "kesten_stigum_record.json"
    code, out, _ = run_cli("replay", str(record))
    assert code == 0 and out.strip() == "replay identical"

    data = json.loads(record.read_text())
    data["digests"][0] = "0" * len(data["digests"][0])
    record.write_text(json.dumps(data))
    code, out, _ = run_cli("replay", str(record))
    assert code == 1 and "DIFFERS" in out


def test_verify_exit_status_follows_verdict(tmp_path):
    # too few survivors: the discrepancy suite fails its first assertion
    code, out, _ = run_cli("verify", "discrepancy", "--replicas", "60", "--generations", "16",
                           "--out", str(tmp_path))
    verdict = json.loads((tmp_path / "discrepancy_verdict.json").read_text())
    assert verdict["passed"] is False and code == 1
    assert "FAIL" in out


def test_verify_outputs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        code, _, _ = run_cli("verify", "martingale", "--replicas", "60", "--generations", "10",
                             "--out", str(tmp_path / name))
        assert code in (0, 1)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "martingale_verdict.json" in files and any(f.endswith(".csv") for f in files)
    for f in files:
        if f.endswith("_record.json"):
            continue
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_suite_mismatch_and_missing_file(tmp_path):
    cfg = tmp_path / "ks.cfg"
    cfg.write_text(KS_SMALL)
    code, _, err = run_cli("verify", "support", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2 and "run.suite" in err
    code, _, err = run_cli("simulate", "--config", str(tmp_path / "missing.cfg"))
    assert code == 2 and err.startswith("error:")


def test_bad_record_schema(tmp_path):
    rec = tmp_path / "r.json"
    rec.write_text(json.dumps({"schema": 2}))
    code, _, err = run_cli("replay", str(rec))
    assert code == 2 and "schema" in err


def test_invalid_flags_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["verify", "no_such_suite"])
    assert info.value.code != 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "brwmartin.cli", "potential", "green", "--chain",
                           "drifted_line:2/3", "--x", "0", "--y", "0", "--walks", "1000", "--horizon", "50"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "exact 3.0" in proc.stdout
