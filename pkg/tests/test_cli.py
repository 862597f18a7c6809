import numpy as np
import pytest

from mahjb.cli import main, parse_levels, read_config, ConfigError
from mahjb.fileio import read_mesh, read_solution
from mahjb.geometry import concave_bent_radius


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(text):
    return dict(line.split(" ", 1) for line in text.strip().splitlines())


def test_parse_levels():
    assert parse_levels("0..3") == (0, 1, 2, 3)
    assert parse_levels("2,0,2") == (0, 2)


def test_domains(capsys):
    code, out, _ = run(capsys, "domains")
    assert code == 0 and "quartic-lshape" in out and "heart" in out


def test_mesh_and_refine(capsys, tmp_path):
    code, out, _ = run(capsys, "mesh", "--domain", "lshape", "--h0", "0.25")
    coarse = int(report(out)["nodes"])
    code, out, _ = run(capsys, "mesh", "--domain", "lshape", "--h0", "0.25", "--refine", "1",
                       "--out", str(tmp_path / "m.txt"))
    assert code == 0
    fine = int(report(out)["nodes"])
    assert 3 * coarse < fine < 5 * coarse
    assert read_mesh(tmp_path / "m.txt").n_nodes == fine


def test_mesh_square_area(capsys):
    code, out, _ = run(capsys, "mesh", "--domain", "square", "--h0", "1.0")
    assert code == 0 and float(report(out)["area"]) == pytest.approx(4.0)


def test_mesh_concave_bent_square_boundary(capsys, tmp_path):
    path = tmp_path / "b.txt"
    code, _, _ = run(capsys, "mesh", "--domain", "bent-square-concave", "--c", "3", "--h0", "0.1",
                     "--out", str(path))
    assert code == 0
    mesh = read_mesh(path)
    b = mesh.nodes[mesh.boundary_node]
    r = concave_bent_radius(3.0)
    on_circle = np.zeros(len(b), bool)
    for cx, cy in [(3, 0), (-3, 0), (0, 3), (0, -3)]:
        on_circle |= np.abs(np.hypot(b[:, 0] - cx, b[:, 1] - cy) - r) <= 1e-10
    on_square = np.isclose(np.abs(b), 1.0, atol=1e-10).any(axis=1)
    assert np.all(on_circle | on_square)


def test_solve_quartic_coarse(capsys, tmp_path):
    out_path = tmp_path / "u.txt"
    code, out, _ = run(capsys, "solve", "--experiment", "quartic-lshape", "--m", "2", "--out", str(out_path))
    rep = report(out)
    assert code == 0
    assert int(rep["newton_iterations"]) <= 12
    assert 0.5 * 6.28e-2 <= float(rep["rel_linf_error"]) <= 2 * 6.28e-2
    nodes, u = read_solution(out_path)
    assert len(u) == int(rep["dofs"])


def test_solve_affine_data_reproduces_affine(capsys, tmp_path):
    out_path = tmp_path / "u.txt"
    code, _, _ = run(capsys, "solve", "--domain", "heart", "--h0", "0.15", "--f", "zero", "--g", "affine",
                     "--m", "3", "--out", str(out_path))
    assert code == 0
    nodes, u = read_solution(out_path)
    np.testing.assert_allclose(u, 0.3 + 1.5 * nodes[:, 0] - 0.7 * nodes[:, 1], atol=1e-8)


def test_solve_heart_shows_steep_transition_at_the_cusp(capsys, tmp_path):
    out_path = tmp_path / "u.txt"
    code, out, _ = run(capsys, "solve", "--experiment", "heart", "--refine", "3", "--m", "8",
                       "--out", str(out_path))
    assert code == 0
    mesh_nodes, u = read_solution(out_path)
    from mahjb.experiments import get_experiments
    from mahjb.mesh import generate_mesh, refine

    spec = get_experiments("heart")[0]
    mesh = refine(generate_mesh(spec.polygon(), spec.h0), 3)
    np.testing.assert_array_equal(mesh.nodes, mesh_nodes)
    e = mesh.edges()
    grad = np.abs(u[e[:, 0]] - u[e[:, 1]]) / np.hypot(*(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]]).T)
    mid = 0.5 * (mesh.nodes[e[:, 0]] + mesh.nodes[e[:, 1]])
    near = np.hypot(*mid.T) < 0.1
    assert grad[near].max() > 5 * np.median(grad)


def test_non_convergence_exit_code(capsys, tmp_path):
    out_path = tmp_path / "u.txt"
    code, out, _ = run(capsys, "solve", "--experiment", "quartic-lshape", "--refine", "1", "--m", "4",
                       "--max-iter", "1", "--out", str(out_path))
    assert code == 2
    assert report(out)["converged"] == "false"
    assert out_path.exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["mesh", "--domain", "pentagon", "--h0", "0.2"],
        ["mesh", "--domain", "square", "--h0", "0.5", "--out", "/nonexistent/dir/m.txt"],
        ["solve", "--experiment", "bent-square", "--m", "2"],
        ["solve", "--experiment", "nope"],
        ["study", "--experiment", "quartic-lshape", "--m", "0.5"],
        ["mesh", "--config", "/nonexistent/config.txt", "--domain", "square"],
    ],
)
def test_config_and_io_errors(capsys, argv):
    if argv[1] == "--config":
        argv = ["--config", argv[2], argv[0]] + argv[3:]
    assert run(capsys, *argv)[0] == 3


def test_study_rows_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["study", "--experiment", "quartic-lshape", "--levels", "0..3", "--m", "2,4,8"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b), "--threads", "1")[0] == 0
    lines = a.read_text().splitlines()
    assert len(lines) == 13
    assert a.read_bytes() == b.read_bytes()
    level0_m2 = lines[1].split(",")
    assert 0.5 * 6.28e-2 <= float(level0_m2[5]) <= 2 * 6.28e-2


def test_config_file_with_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# coarse quartic run\nexperiment = quartic-lshape\nlevels = 0..1\nm = 2,4\nstep-tol = 1e-9\n")
    code, out, _ = run(capsys, "--config", str(cfg), "study", "--m", "2")
    assert code == 0
    assert len(out.strip().splitlines()) == 3
    assert read_config(cfg)["step_tol"] == "1e-9"
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign here\n")
    with pytest.raises(ConfigError):
        read_config(bad)
    bad.write_text("colour = blue\n")
    assert run(capsys, "--config", str(bad), "study")[0] == 3
