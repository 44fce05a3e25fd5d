import pytest
import yaml

from gfmstab.cli import main
from gfmstab.scenario import parse_scenario, to_dict


def test_eac_table(capsys, tmp_path):
    assert main(["eac", "--scenario", "smib_eac", "--out", str(tmp_path), "--curves", "19"]) == 0
    out = capsys.readouterr().out
    assert "Base - no CL" in out and "FVB - HCL" in out
    assert len([ln for ln in out.splitlines() if ln.startswith(("Base", "FVB"))]) == 6
    assert (tmp_path / "smib_eac_table.csv").exists()
    assert len((tmp_path / "smib_eac_curves.csv").read_text().splitlines()) == 20


def test_simulate_writes_identical_csv(capsys, tmp_path):
    args = ["simulate", "--scenario", "kundur_fault1", "--override", "clear_ms=140", "--horizon-s", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert "loss of synchronism" in capsys.readouterr().out
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "kundur_fault1_csa_none.csv").read_bytes()
    b = (tmp_path / "b" / "kundur_fault1_csa_none.csv").read_bytes()
    assert a == b
    header = a.splitlines()[0].decode().split(",")
    assert header[:7] == ["t", "vsc1_delta_deg", "vsc1_domega_pu", "vsc1_pg_pu", "vsc1_ig_pu",
                          "vsc1_vf_pu", "vsc1_dvts_pu"]
    assert header[-1] == "los"
    assert a.splitlines()[-1].decode().endswith(",1")


def test_config_error_exit_code(capsys):
    assert main(["simulate", "--scenario", "kundur_fault1", "--limiter", "hcl",
                 "--override", "i_thres=1.3"]) == 2
    assert "i_thres < i_max" in capsys.readouterr().err


def test_wrong_scenario_kind(capsys):
    assert main(["eac", "--scenario", "kundur_fault1"]) == 2
    assert main(["simulate", "--scenario", "smib_eac"]) == 2


def test_argparse_rejects_bad_flag():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scenario", "kundur_fault1", "--fvb", "turbo"])
    assert exc.value.code == 2


def test_numerical_failure_exit_code(capsys, tmp_path):
    # a load far beyond the transfer capability has no power-flow solution
    raw = to_dict(parse_scenario("kundur_fault1"))
    raw["network"]["loads"][0]["p_mw"] = 1e6
    path = tmp_path / "overload.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path)]) == 3
    assert "power flow" in capsys.readouterr().err
