import numpy as np
import pytest

from discrete_ma.cli import main
from discrete_ma.io import format_mafn, parse_hull, parse_mafn, read_mafn, write_mafn
from discrete_ma.envelope import lower_hull
from discrete_ma.errors import ConfigError
from discrete_ma.lattice import Box, build_domain
from discrete_ma.meshfn import MeshFunction, sample


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def quad_file(tmp_path, capsys):
    path = tmp_path / "quad.mafn"
    code, _, _ = run(capsys, "mafn", "sample", "--domain", "box:-1,-1,1,1", "--h", 0.25, "--stencil", 2, "--f", "quadratic", "--out", path)
    assert code == 0
    return path


@pytest.fixture
def bump_file(tmp_path):
    dom = build_domain(Box((-1.0, -1.0), (1.0, 1.0)), 0.5, 1)
    u = sample(lambda x: x @ x, dom)
    vals = u.values.copy()
    vals[dom.node_id((0, 0))] += 1.0
    path = tmp_path / "bump.mafn"
    write_mafn(MeshFunction(dom, vals), path)
    return path


# -- mafn format -------------------------------------------------------------


def test_mafn_round_trip(quad_file):
    u = read_mafn(quad_file)
    assert u.dom.h == 0.25 and u.dom.V.radius == 2
    assert parse_mafn(format_mafn(u)).values.tolist() == u.values.tolist()
    assert np.allclose(u.values, 0.5 * np.sum(u.dom.nodes**2, axis=1), atol=1e-15)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: "",
        lambda t: t.replace("mafn v1", "mafn v2", 1),
        lambda t: t.replace(" h=", " step=", 1),
        lambda t: t.replace("d=2", "d=1", 1),
        lambda t: "\n".join(t.splitlines()[:-1]),
        lambda t: t.replace("\n0 ", "\n0 0.123 ", 1),
        lambda t: t.replace("\n1 ", "\n999 ", 1),
    ],
)
def test_malformed_mafn(quad_file, mutate):
    with pytest.raises(ConfigError):
        parse_mafn(mutate(quad_file.read_text()))


def test_hull_dump_round_trip():
    dom = build_domain(Box((-1.0, -1.0), (1.0, 1.0)), 0.5, 1)
    u = sample(lambda x: abs(x[0]) + x[1] ** 2, dom)
    hull = lower_hull(u)
    back = parse_hull(hull.dump())
    assert np.allclose(back.slopes, hull.slopes) and np.allclose(back.offsets, hull.offsets)
    with pytest.raises(ConfigError):
        parse_hull("X 1 2 3")


# -- commands ----------------------------------------------------------------


def test_lattice_dump(capsys):
    code, out, _ = run(capsys, "mafn", "lattice", "--domain", "box:-1,1", "--h", 0.5)
    assert code == 0 and out.strip()


def test_check_convex(capsys, quad_file, bump_file):
    code, out, _ = run(capsys, "mafn", "check-convex", quad_file)
    assert code == 0 and out.startswith("discrete_convex true")
    code, out, _ = run(capsys, "mafn", "check-convex", bump_file)
    assert code == 1 and "violation node=" in out


def test_delta(capsys, quad_file):
    code, out, _ = run(capsys, "mafn", "delta", quad_file, "--at", "0,0", "--dir", "1,1")
    assert code == 0 and float(out) == pytest.approx(2.0, abs=1e-12)


def test_envelope_commands(capsys, tmp_path, bump_file):
    hull_path = tmp_path / "bump.hull"
    assert run(capsys, "envelope", "build", bump_file, "--out", hull_path)[0] == 0
    code, out, _ = run(capsys, "envelope", "eval", hull_path, "--at", "0,0")
    assert code == 0 and float(out) == pytest.approx(0.25, abs=1e-12)  # the axis neighbours all carry 0.25
    code, out, _ = run(capsys, "envelope", "eval", hull_path, "--at", "3,0", "--extension")
    assert code == 0
    assert run(capsys, "envelope", "eval", hull_path, "--at", "3,0")[0] == 2
    code, out, _ = run(capsys, "envelope", "contact", bump_file)
    ids = [int(ln.split()[0]) for ln in out.splitlines()]
    dom = read_mafn(bump_file).dom
    assert dom.node_id((0, 0)) not in ids and len(ids) == dom.n_interior - 1


def test_subdiff_commands(capsys, quad_file, bump_file):
    code, out, _ = run(capsys, "subdiff", "cell", quad_file, "--at", "0,0")
    direct = out.split()
    code2, out2, _ = run(capsys, "subdiff", "cell", quad_file, "--at", "0,0", "--method", "hull")
    assert code == code2 == 0 and direct[:2] == out2.split()[:2] == ["C", direct[1]]
    assert np.allclose(sorted(map(float, direct[3:])), sorted(map(float, out2.split()[3:])), atol=1e-12)
    code, out, _ = run(capsys, "subdiff", "check-equiv", bump_file)
    assert code == 0 and "violations 0" in out


def test_measure_commands(capsys, tmp_path, quad_file):
    csv = tmp_path / "w.csv"
    assert run(capsys, "measure", "weights", quad_file, "--out", csv)[0] == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "node_id,x,y,weight"
    weights = {tuple(map(float, r.split(",")[1:3])): float(r.split(",")[-1]) for r in rows[1:]}
    # away from the boundary the cell of 0.5|x|^2 is the h-square around the node
    assert weights[(0.0, 0.0)] == pytest.approx(0.0625, abs=1e-14)
    code, out, _ = run(capsys, "measure", "total", quad_file)
    assert float(out) == pytest.approx(sum(weights.values()), rel=1e-14)
    code, out, _ = run(capsys, "measure", "region", quad_file, "--box=-0.1,-0.1,0.1,0.1")
    assert float(out) == pytest.approx(0.0625, abs=1e-14)
    code, out, _ = run(capsys, "measure", "region", quad_file, "--ball", "0,0,0.25", "--density", "rq:1")
    assert 0 < float(out) < 5 * 0.0625
    code, out, _ = run(capsys, "measure", "region", quad_file, "--region", "polygon:0,0,0.3,0,0,0.3")
    assert float(out) == pytest.approx(3 * 0.0625, abs=1e-14)


def test_laplace_commands(capsys, tmp_path):
    path = tmp_path / "w.mafn"
    code, _, _ = run(capsys, "laplace", "solve", "--domain", "ball:0,0,1", "--h", 0.125, "--g", "x1x2", "--out", path)
    assert code == 0 and read_mafn(path).dom.n_interior > 0
    assert run(capsys, "laplace", "solve", "--domain", "ball:0,0,1", "--h", 0.125, "--g", "nope")[0] == 2
    code, out, _ = run(capsys, "laplace", "barrier", "--mu", 0.5, "--d", 3, "--eta", 1)
    rows = dict(ln.split(",") for ln in out.splitlines()[1:])
    assert out.startswith("name,value") and float(rows["a"]) == pytest.approx(6 / 7, abs=1e-15)
    assert run(capsys, "laplace", "barrier", "--mu", 1.5, "--d", 3)[0] == 2


def test_run_command(capsys, tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("experiment = laplace-convergence\ndomain = box:-1,-1,1,1\nharmonic = x1x2\nh = 1/4, 1/8\n")
    code, out, err = run(capsys, "run", "laplace-convergence", "--config", cfg, "--svg")
    assert code == 0 and out.startswith("h,label") and "PASS" in err
    assert (tmp_path / "a.csv").exists() and (tmp_path / "a.svg").exists()
    assert run(capsys, "run", "mass-sweep", "--config", cfg)[0] == 2
    assert run(capsys, "run", "mass-sweep", "--config", tmp_path / "missing.cfg")[0] == 2


def test_missing_file_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "measure", "total", tmp_path / "nope.mafn")
    assert code == 2 and err.startswith("error:")
