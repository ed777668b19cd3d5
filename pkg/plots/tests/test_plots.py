import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ergoplots import FIG2_OFFSETS, KINDS, FigureSpec, SchemaError, fig4_series, render
from ergoplots.cli import main
from ergoplots.figures import _fit_window

GW_HEADER = "dt,G,W,sigma_G2,g_stderr,w_stderr,s2_stderr"
SUMMARY_HEADER = "lattice,N_nn,lambda_max,Lambda,var_direct,var_eq10,tau_eq4,tau_eq9,tau_eq11,verdict"
SWEEP_HEADER = "label,dims,n_sites,n_nn,lambda_max,lambda_stderr,var_dlambda,var_stderr"


def write_gw(path, dt, g, w, s2):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [GW_HEADER]
    for row in zip(dt, g, w, s2):
        lines.append(",".join(repr(float(v)) for v in row) + ",0.01,0.01,0.001")
    path.write_text("\n".join(lines) + "\n")


def saturating_curves(rate, plateau_at=22.0, floor=-16.0):
    dt = np.linspace(0.0, 30.0, 31)
    g = floor + rate * np.minimum(dt, plateau_at)
    w = g + 0.4
    s2 = 0.05 * 2.0 * dt
    return dt, g, w, s2


def make_run_dir(tmp, labels=("1d", "2d", "3d")):
    rows = []
    presets = {
        "1d": (2, 0.646, 0.718, 0.349, 0.404, 0.265, 0.207, 0.173),
        "2d": (4, 0.698, 0.733, 0.382, 0.396, 0.275, 0.346, 0.293),
        "3d": (6, 0.652, 0.674, 0.276, 0.304, 0.206, 0.284, 0.473),
    }
    for label in labels:
        n_nn, lam, big, var_d, var_e, t4, t9, t11 = presets[label]
        dt, g, w, s2 = saturating_curves(lam)
        write_gw(tmp / label / "gw_curves.csv", dt, g, w, s2)
        rows.append(f"{label},{n_nn},{lam},{big},{var_d},{var_e},{t4},{t9},{t11},ergodic")
    (tmp / "summary.csv").write_text(SUMMARY_HEADER + "\n" + "\n".join(rows) + "\n")
    return tmp


def sha_tree(root):
    out = {}
    for p in sorted(Path(root).rglob("*.csv")):
        out[str(p)] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_fig2_smoke_minimal_rows(tmp_path):
    write_gw(tmp_path / "3d" / "gw_curves.csv",
             [0.0, 1.0, 2.0], [-16.0, -15.3, -14.6], [-15.8, -15.1, -14.4],
             [0.0, 0.1, 0.2])
    out = tmp_path / "fig2.svg"
    render(FigureSpec("fig2", tmp_path, out))
    blob = out.read_bytes()
    assert blob.startswith(b"<?xml")
    assert b"<svg" in blob and len(blob) > 1000
    # the W curve is drawn dashed, so both curve styles must be present
    assert b"stroke-dasharray" in blob


def test_fig2_offsets_toggle(tmp_path):
    only_1d = make_run_dir(tmp_path / "a", labels=("1d",))
    shifted = render(FigureSpec("fig2", only_1d, tmp_path / "s.svg", offsets=True))
    plain = render(FigureSpec("fig2", only_1d, tmp_path / "p.svg", offsets=False))
    assert shifted.read_bytes() != plain.read_bytes()

    only_3d = make_run_dir(tmp_path / "b", labels=("3d",))
    shifted = render(FigureSpec("fig2", only_3d, tmp_path / "s3.svg", offsets=True))
    plain = render(FigureSpec("fig2", only_3d, tmp_path / "p3.svg", offsets=False))
    assert FIG2_OFFSETS["3d"] == 0.0
    assert shifted.read_bytes() == plain.read_bytes()


def test_fit_window_recovers_slope():
    x = np.linspace(0.0, 10.0, 21)
    slope, intercept, xw = _fit_window(x, -16.0 + 0.7 * x)
    assert abs(slope - 0.7) < 1e-8
    assert abs(intercept + 16.0) < 1e-7
    # saturated tail stays out of the window
    slope, _, xw = _fit_window(x, -16.0 + 0.7 * np.minimum(x, 6.0))
    assert abs(slope - 0.7) < 1e-8
    assert xw.max() <= 6.0


def test_fig3_smoke(tmp_path):
    rows = [
        "a,1,16,2,0.64,0.01,0.35,0.02",
        "b,1,32,2,0.65,0.01,0.20,0.02",
        "c,1,64,2,0.65,0.01,0.11,0.01",
        "d,2,16,4,0.70,0.01,0.30,0.02",
        "e,2,36,4,0.70,0.01,0.16,0.01",
    ]
    (tmp_path / "fig3_sweep.csv").write_text(SWEEP_HEADER + "\n" + "\n".join(rows) + "\n")
    out = render(FigureSpec("fig3", tmp_path, tmp_path / "fig3.svg"))
    blob = out.read_bytes()
    assert b"<svg" in blob
    assert b"stroke-dasharray" in blob


def test_fig4_flat_ratio_sits_on_level(tmp_path):
    level = 0.025
    dt = np.linspace(0.0, 30.0, 31)
    write_gw(tmp_path / "1d" / "gw_curves.csv",
             dt, -16.0 + 0.65 * dt, -15.6 + 0.65 * dt, 2.0 * level * dt)
    (tmp_path / "summary.csv").write_text(
        SUMMARY_HEADER + "\n" + "1d,2,0.65,0.675,0.3,0.3,0.2,0.2,0.2,ergodic\n")
    series = fig4_series(tmp_path)
    assert len(series) == 1
    label, dts, ratio, dashed = series[0]
    assert label == "1d"
    assert 0.0 not in dts
    assert abs(dashed - level) < 1e-15
    assert np.allclose(ratio, dashed, rtol=0.0, atol=1e-12)
    out = render(FigureSpec("fig4", tmp_path, tmp_path / "fig4.svg"))
    assert b"stroke-dasharray" in out.read_bytes()


def test_fig4_missing_lattice_files_are_an_error(tmp_path):
    (tmp_path / "summary.csv").write_text(
        SUMMARY_HEADER + "\n" + "2d,4,0.70,0.73,0.3,0.3,0.2,0.2,0.2,ergodic\n")
    with pytest.raises(SchemaError, match="file not found"):
        fig4_series(tmp_path)


def test_table1_nine_tau_cells(tmp_path):
    run = make_run_dir(tmp_path)
    out = tmp_path / "table1.md"
    render(FigureSpec("table1", run, out))
    lines = out.read_text().strip().splitlines()
    assert lines[0].split("|")[1:-1] == [
        f" {name} " for name in SUMMARY_HEADER.split(",")]
    body = lines[2:]
    assert len(body) == 3
    taus = []
    for line in body:
        cells = [c.strip() for c in line.split("|")[1:-1]]
        assert cells[0] in ("1d", "2d", "3d")
        assert cells[-1] == "ergodic"
        taus.extend(cells[6:9])
    assert len(taus) == 9
    expect = ["0.265", "0.207", "0.173", "0.275", "0.346", "0.293",
              "0.206", "0.284", "0.473"]
    assert taus == expect


def test_rendering_is_deterministic_and_read_only(tmp_path):
    run = make_run_dir(tmp_path / "run")
    rows = ["a,1,16,2,0.64,0.01,0.35,0.02", "b,2,16,4,0.70,0.01,0.30,0.02"]
    (run / "fig3_sweep.csv").write_text(SWEEP_HEADER + "\n" + "\n".join(rows) + "\n")
    before = sha_tree(run)
    first = {}
    for kind in KINDS:
        suffix = ".md" if kind == "table1" else ".svg"
        out = render(FigureSpec(kind, run, tmp_path / f"one-{kind}{suffix}"))
        first[kind] = out.read_bytes()
    time.sleep(1.1)  # a timestamp leaking into the body would differ now
    for kind in KINDS:
        suffix = ".md" if kind == "table1" else ".svg"
        out = render(FigureSpec(kind, run, tmp_path / f"two-{kind}{suffix}"))
        assert out.read_bytes() == first[kind], kind
    assert sha_tree(run) == before


def test_schema_errors_carry_line_numbers(tmp_path):
    bad = tmp_path / "gw_curves.csv"
    bad.write_text("dt,G,W\n0.0,1.0,2.0\n")
    (tmp_path / "3d").mkdir()
    target = tmp_path / "3d" / "gw_curves.csv"

    target.write_text(bad.read_text())
    with pytest.raises(SchemaError, match=r"gw_curves\.csv:1: header"):
        render(FigureSpec("fig2", tmp_path, tmp_path / "o.svg"))

    target.write_text(GW_HEADER + "\n0.0,-16.0,-15.8,0.0,0.01,0.01,0.001\n"
                      "0.1,oops,-15.7,0.1,0.01,0.01,0.001\n")
    with pytest.raises(SchemaError, match=r":3: column 'G': 'oops'"):
        render(FigureSpec("fig2", tmp_path, tmp_path / "o.svg"))

    target.write_text(GW_HEADER + "\n0.0,-16.0\n")
    with pytest.raises(SchemaError, match=r":2: 2 fields, expected 7"):
        render(FigureSpec("fig2", tmp_path, tmp_path / "o.svg"))

    target.write_text(GW_HEADER + "\n")
    with pytest.raises(SchemaError, match=r":2: no data rows"):
        render(FigureSpec("fig2", tmp_path, tmp_path / "o.svg"))


def test_cli_reports_errors_and_exit_codes(tmp_path, capsys):
    rc = main(["fig2", "--in", str(tmp_path / "nowhere"), "--out",
               str(tmp_path / "x.svg")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")

    run = make_run_dir(tmp_path / "run", labels=("1d",))
    rc = main(["fig2", "--in", str(run), "--out", str(tmp_path / "x.txt")])
    assert rc == 1
    assert "unsupported output format" in capsys.readouterr().err

    with pytest.raises(SystemExit):
        main(["fig9", "--in", str(run), "--out", str(tmp_path / "x.svg")])
    with pytest.raises(SystemExit):
        main(["fig2", "--out", str(tmp_path / "x.svg")])


def test_cli_renders_every_kind(tmp_path):
    run = make_run_dir(tmp_path / "run")
    rows = ["a,1,16,2,0.64,0.01,0.35,0.02", "b,3,64,6,0.65,0.01,0.28,0.02"]
    (run / "fig3_sweep.csv").write_text(SWEEP_HEADER + "\n" + "\n".join(rows) + "\n")
    for kind in KINDS:
        suffix = ".md" if kind == "table1" else ".svg"
        out = tmp_path / f"{kind}{suffix}"
        assert main([kind, "--in", str(run), "--out", str(out)]) == 0
        assert out.stat().st_size > 0
    assert main(["fig2", "--in", str(run), "--no-offsets",
                 "--out", str(tmp_path / "flat.svg")]) == 0


def test_primary_package_is_never_imported(tmp_path):
    run = make_run_dir(tmp_path, labels=("2d",))
    render(FigureSpec("fig2", run, tmp_path / "o.svg"))
    assert "ergochron" not in sys.modules


@pytest.mark.skipif("ERGOCHRON_ACCEPTANCE_CACHE" not in os.environ,
                    reason="needs a reference run directory")
def test_kinds_against_reference_run(tmp_path):
    run = Path(os.environ["ERGOCHRON_ACCEPTANCE_CACHE"])
    if not (run / "summary.csv").is_file():
        pytest.skip("cache directory has no summary.csv")
    for kind in ("fig2", "fig4", "table1"):
        suffix = ".md" if kind == "table1" else ".svg"
        out = tmp_path / f"{kind}{suffix}"
        assert main([kind, "--in", str(run), "--out", str(out)]) == 0
        assert out.stat().st_size > 0
    table = (tmp_path / "table1.md").read_text().strip().splitlines()
    taus = [c.strip() for line in table[2:] for c in line.split("|")[7:10]]
    assert len(taus) == 9
    assert all(float(t) > 0.0 for t in taus)
