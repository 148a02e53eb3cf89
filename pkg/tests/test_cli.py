import csv
import json

import numpy as np
import pytest

import wavefeed.cli as cli
import wavefeed.simulator as sim
from wavefeed.lti import NonMinimumPhaseError
from wavefeed.forces import IdentificationError
from wavefeed.metrics import TABLE1, write_load_cases


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("WAVEFEED_OUT", raising=False)
    return tmp_path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- identify ------------------------------------------------------------------

def test_identify_shipped_coefficients(out, capsys):
    assert cli.main(["identify", "--out", str(out)]) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert "surge_force" in text and "pitch_moment" in text and "t_p" in text
    report = json.loads((out / "fit_report.json").read_text())
    assert report["t_p"] == pytest.approx(10.0, abs=1.0)
    assert (out / "pwem.json").exists()


def test_identify_quality_gate(out):
    assert cli.main(["identify", "--threshold", "100.1", "--out", str(out)]) == cli.EXIT_QUALITY


def test_malformed_csv_reports_line(out, capsys):
    bad = out / "bad.csv"
    bad.write_text("omega_rad_s,Fx_re,Fx_im,My_re,My_im\n0.5,1,0,1,0\n0.6,1,zero,1,0\n")
    assert cli.main(["identify", str(bad), "--out", str(out)]) == cli.EXIT_PARSE
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["identify", "--order", "0"], ["identify", "--t-p", "soon"],
                                  ["bogus"], ["simulate", "--mode", "FF"], []])
def test_usage_errors(out, argv):
    with pytest.raises(SystemExit) as ex:
        code = cli.main(argv + ["--out", str(out)] if argv and argv[0] != "bogus" else argv)
        raise SystemExit(code)
    assert ex.value.code == cli.EXIT_USAGE


def test_identification_failure(out, monkeypatch):
    def boom(*a, **k):
        raise IdentificationError("rank deficient")
    monkeypatch.setattr(cli, "identify_pwem", boom)
    assert cli.main(["identify", "--out", str(out)]) == cli.EXIT_IDENT


# -- synthesize ----------------------------------------------------------------

@pytest.mark.parametrize("wind,channel", [(8.0, "torque"), (17.9, "pitch")])
def test_synthesize_schedules_channel(out, wind, channel):
    assert cli.main(["synthesize", "--wind", str(wind), "--out", str(out)]) == cli.EXIT_OK
    ctrl = json.loads((out / "controller.json").read_text())
    assert ctrl["channel"] == channel
    header = (out / "bode.csv").read_text().splitlines()[0].split(",")
    assert {"full_mag_db", "reduced_mag_db", "shaped_mag_db"} <= set(header)


def test_synthesize_unshaped_single_curve(out):
    assert cli.main(["synthesize", "--no-shaping", "--out", str(out)]) == cli.EXIT_OK
    header = (out / "bode.csv").read_text().splitlines()[0].split(",")
    assert header == ["omega_rad_s", "full_mag_db", "full_phase_deg"]
    ctrl = json.loads((out / "controller.json").read_text())
    assert ctrl["order"] is None or ctrl["order"] == len(ctrl["full"]["A"])


def test_synthesize_nmp_exit(out, monkeypatch, capsys):
    def boom(*a, **k):
        raise NonMinimumPhaseError(np.array([0.25 + 0j]))
    monkeypatch.setattr(cli, "design_feedforward", boom)
    assert cli.main(["synthesize", "--out", str(out)]) == cli.EXIT_SYNTH
    assert "0.25" in capsys.readouterr().err


# -- simulate ------------------------------------------------------------------

def test_simulate_writes_record(out, monkeypatch):
    monkeypatch.setenv("WAVEFEED_OUT", str(out / "env"))
    assert cli.main(["simulate", "--case", "3", "--duration", "600", "--record-stride", "20"]) == cli.EXIT_OK
    rows = read_rows(out / "env" / "record.csv")
    assert len(rows) == 600 / 0.05 / 20
    assert json.loads((out / "env" / "metrics.json").read_text())["std_rotor_speed"] > 0


def test_simulate_case_out_of_range(out):
    assert cli.main(["simulate", "--case", "9", "--out", str(out)]) == cli.EXIT_USAGE


# -- campaign and report -----------------------------------------------------

def small_config(tmp_path, **kw):
    cases = tmp_path / "cases.csv"
    write_load_cases(cases, [TABLE1[2], TABLE1[4]])
    cfg = dict(load_cases=str(cases), seeds=[1], duration=600.0, workers=1, output=str(tmp_path / "camp"))
    cfg.update(kw)
    path = tmp_path / "campaign.json"
    path.write_text(json.dumps(cfg))
    return path


def test_campaign_count_contract(out):
    assert cli.main(["campaign", "--config", str(small_config(out))]) == cli.EXIT_OK
    camp = out / "camp"
    assert len(list((camp / "records").glob("*.csv"))) == 3 * 2
    assert len(read_rows(camp / "metrics_runs.csv")) == 6
    assert len(read_rows(camp / "per_case.csv")) == 6
    agg = read_rows(camp / "aggregate.csv")
    assert [r["metric"] for r in agg][0].startswith("STD")
    spectra = (camp / "spectra_rotor_speed.csv").read_text().splitlines()[0].split(",")
    assert spectra == ["frequency_hz", "case1_BL", "case1_BL+FF", "case2_BL", "case2_BL+FF"]


def test_zero_gain_campaign_matches_baseline(out):
    assert cli.main(["campaign", "--config", str(small_config(out, k_ff=0.0, write_records=False))]) == 0
    for row in read_rows(out / "camp" / "aggregate.csv"):
        assert row["BL"] == row["BL+FF"]


def test_campaign_is_deterministic(out):
    cfg = small_config(out, modes=["BL+FF"], write_records=False)
    cli.main(["campaign", "--config", str(cfg)])
    first = (out / "camp" / "metrics_runs.csv").read_bytes()
    cli.main(["campaign", "--config", str(cfg), "--workers", "2"])
    assert (out / "camp" / "metrics_runs.csv").read_bytes() == first


def test_campaign_divergence_is_partial(out, monkeypatch):
    monkeypatch.setattr(sim, "DIVERGENCE_LIMIT", 1e-6)
    cfg = small_config(out, modes=["BL"], write_records=False)
    assert cli.main(["campaign", "--config", str(cfg)]) == cli.EXIT_PARTIAL
    summary = json.loads((out / "camp" / "campaign.json").read_text())
    assert len(summary["failed"]) == 2


def test_campaign_config_validation(out):
    assert cli.main(["campaign", "--config", str(small_config(out, modes=[]))]) == cli.EXIT_PARSE
    assert cli.main(["campaign", "--config", str(small_config(out, plant="missing.json"))]) == cli.EXIT_PARSE
    assert cli.main(["campaign", "--config", str(small_config(out, colour="red"))]) == cli.EXIT_PARSE
    (out / "broken.json").write_text("{")
    assert cli.main(["campaign", "--config", str(out / "broken.json")]) == cli.EXIT_PARSE


def test_write_default_config(out):
    path = out / "default.json"
    assert cli.main(["campaign", "--write-config", str(path)]) == cli.EXIT_OK
    cfg = cli.CampaignConfig.from_file(path)
    assert cfg.modes == list(sim.MODES) and cfg.seeds == [1, 2] and cfg.duration == 3600.0


def test_report_reaggregates(out):
    cli.main(["campaign", "--config", str(small_config(out, write_records=False))])
    camp = out / "camp"
    before = (camp / "aggregate.csv").read_text()
    assert cli.main(["report", str(camp), "--out", str(out / "rep")]) == cli.EXIT_OK
    assert (out / "rep" / "aggregate.csv").read_text() == before


def test_report_missing_directory(out):
    assert cli.main(["report", str(out / "nothing")]) == cli.EXIT_PARSE
