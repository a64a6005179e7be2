import math
import threading

import numpy as np
import pytest

from eploom import sweep, topo
from eploom.errors import Cancelled, GridMismatch, NoComparableCells
from eploom.evolve import transfer_fidelity
from eploom.loops import Direction, preset
from eploom.sweep import GridSpec


def small(pid, n=5, **kw):
    x, y = sweep.DEFAULT_AXES[pid]
    return GridSpec(x, y, nx=n, ny=n + 1, **kw)


def test_grid_validation():
    g = GridSpec("G0", "Gamma0")
    assert g.nx == g.ny == 101 and g.xs[0] == -0.4 and g.ys[-1] == 0.4
    for bad in (
        dict(x_param="omega", y_param="G0"),
        dict(x_param="G0", y_param="G0"),
        dict(x_param="G0", y_param="Gamma0", nx=1),
        dict(x_param="G0", y_param="Gamma0", x_range=(0, math.inf)),
    ):
        with pytest.raises(ValueError):
            GridSpec(**bad)
    assert GridSpec.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GridSpec.from_dict({**g.to_dict(), "nz": 3})
    assert sweep.default_grid(3).x_param == "Delta0"
    with pytest.raises(ValueError):
        sweep.default_grid(5)


def test_axis_must_enter_template():
    with pytest.raises(ValueError):
        sweep.winding_map(preset(3), GridSpec("Delta0", "Gamma0", nx=2, ny=2))


def test_constant_map():
    g = GridSpec("Delta0", "G0", (0.2, 0.2), (0.2, 0.2), 2, 2)
    m = sweep.fidelity_map(preset(3, omega=0.126), g)
    assert np.all(m.values == m.values[0, 0]) and np.all(m.ok)
    w = sweep.winding_map(preset(3), g)
    assert np.all(w.values == w.values[0, 0])


def test_marker_and_cells():
    loop = preset(3, omega=0.126)
    g = GridSpec("Delta0", "G0", (0.0, 0.4), (0.0, 0.4), 3, 3)
    m = sweep.fidelity_map(loop, g, direction="cw")
    assert m.marker == (0.2, 0.2) and m.direction is Direction.CW
    assert m.values[1, 1] == transfer_fidelity(loop.with_(direction="cw"))[0]
    assert m.values[2, 0] == transfer_fidelity(m.cell_loop(2, 0))[0]
    assert m.cell_loop(2, 0).Delta0 == 0.4 and m.cell_loop(2, 0).G0 == 0.0


def test_parallel_schedule_is_irrelevant():
    loop = preset(1, omega=0.126)
    g = small(1, 7)
    a = sweep.fidelity_map(loop, g, jobs=1)
    b = sweep.fidelity_map(loop, g, jobs=3)
    c = sweep.fidelity_map(loop, g, jobs=16)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.values, c.values)
    assert (a.flags == c.flags).all()


def test_winding_map_examples():
    m = sweep.winding_map(preset(1), small(1, 9))
    assert np.all(m.values == 0)
    assert set(m.flags.ravel()) <= {sweep.OK, sweep.GRAZING}
    # all-zero amplitudes: loops of zero extent at a non-EP point
    z = sweep.winding_map(preset(3), GridSpec("Delta0", "G0", (0, 0), (0, 0), 2, 2))
    assert np.all(z.values == 0) and np.all(z.ok)


def test_trajectory3_band():
    g = GridSpec("Delta0", "G0", (-0.3, 0.3), (-0.4, 0.4), 7, 41)
    m = sweep.winding_map(preset(3), g)
    G = g.ys[None, :] + 0 * g.xs[:, None]
    inside = (np.abs(G) > 0.15) & (np.abs(G) < 0.25)
    ok = m.ok
    assert np.all(np.abs(m.values[ok]) == np.where(inside[ok], 0.5, 0.0))
    # only the Delta0 = 0 column grazes the EP
    assert set(np.argwhere(~ok)[:, 0]) == {3}


def test_correlate():
    g = small(3, 4)
    vals = np.linspace(0, 1, g.nx * g.ny).reshape(g.nx, g.ny)
    flags = np.full(vals.shape, sweep.OK, dtype=object)
    f = sweep.MapResult(g, "fidelity", vals, flags, (0, 0), Direction.CCW, preset(3))
    nu = sweep.MapResult(g, "winding", np.where(vals < 0.5, -0.5, 0.0), flags.copy(), (0, 0), Direction.CCW, preset(3))
    c = sweep.correlate(f, nu)
    assert c.agreement == 1.0 and c.compared == g.nx * g.ny
    other = sweep.MapResult(small(3, 3), "winding", np.zeros((3, 4)), np.full((3, 4), "ok", dtype=object), (0, 0),
                            Direction.CCW, preset(3))
    with pytest.raises(GridMismatch):
        sweep.correlate(f, other)
    nu.flags[:] = sweep.FAILED
    with pytest.raises(NoComparableCells):
        sweep.correlate(f, nu)


def test_write_and_read(tmp_path):
    m = sweep.winding_map(preset(3), small(3, 3))
    csv_path, json_path = m.write(tmp_path / "w", header_lines=["run: test"])
    text = csv_path.read_text()
    assert text.startswith("# run: test\n# kind: winding\n")
    assert "Delta0,G0,value,flag\n" in text
    back = sweep.read_map(tmp_path / "w")
    np.testing.assert_array_equal(back.values, m.values)
    assert back.grid == m.grid and back.marker == m.marker and back.template == m.template
    assert (back.flags == m.flags).all()
    # row-major: x outer, y inner
    rows = [r for r in text.splitlines() if not r.startswith("#")][1:]
    assert rows[1].split(",")[0] == rows[0].split(",")[0]


def test_cancellation():
    ev = threading.Event()
    ev.set()
    with pytest.raises(Cancelled):
        sweep.fidelity_map(preset(3), small(3), cancel=ev)


def test_cancel_stops_within_a_cell():
    ev = threading.Event()
    calls = []

    def cell(loop):
        calls.append(1)
        if len(calls) == 3:
            ev.set()
        return 0.0, sweep.OK

    with pytest.raises(Cancelled):
        sweep._run(preset(3), small(3), None, "test", cell, 1, ev)
    assert len(calls) == 3


def test_failed_cells_do_not_abort(monkeypatch):
    from eploom.errors import StepSizeUnderflow

    def boom(loop, which="+", opts=None):
        if loop.G0 > 0:
            raise StepSizeUnderflow("forced")
        return (0.25, 0.75)

    monkeypatch.setattr(sweep, "transfer_fidelity", boom)
    m = sweep.fidelity_map(preset(3), GridSpec("Delta0", "G0", (0, 1), (-1, 1), 2, 3))
    assert m.flags[:, 2].tolist() == [sweep.FAILED] * 2
    assert np.isnan(m.values[:, 2]).all() and (m.values[:, 0] == 0.25).all()


def test_winding_cell_matches_topo():
    loop = preset(3, Delta0=-0.1, G0=0.18)
    assert sweep.winding_cell(loop) == (topo.winding_number(loop).nu_quantized, sweep.OK)
    assert sweep.winding_cell(preset(1)) == (0.0, sweep.GRAZING)
