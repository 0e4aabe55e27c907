"""Smoke test of the transmission_py extension module.

Builds the extension with cargo unless TRANSMISSION_PY_LIB points at an
existing shared library, then exercises the main entry points.
"""

import math
import os
import pathlib
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    lib = os.environ.get("TRANSMISSION_PY_LIB")
    if lib is None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "transmission-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        lib = ROOT / "target" / "release" / "libtransmission_py.so"
    stage = pathlib.Path(tempfile.mkdtemp(prefix="transmission-py-"))
    (stage / "transmission_py.so").symlink_to(pathlib.Path(lib).resolve())
    sys.path.insert(0, str(stage))
    import transmission_py

    return transmission_py


def main():
    tp = load_module()

    c = tp.CoefficientSet(1.0, 1.0, 3.0, -1.0)
    assert c.case_label() == "BothNonzero(+,-)", c.case_label()
    report = tp.check_admissibility(c, math.pi**2)
    assert report["admissible"], report["text"]

    assert abs(tp.symbol("u", 2.0, 0.5, complex(3.0, 0.0)).real) > 0.0
    assert tp.det_symbol("both_nonzero", c, 1.0, 1.0, math.pi**2) < 0.0
    for kind in ("D1+", "D1-", "detLambda1", "UplusV", "UtimesV"):
        assert tp.factorization_residual(kind, c, 1.0, 1.0, 12.0) < 1e-10, kind
    assert tp.sign_scan("u", 1000, 1)["violations"] == 0

    # cos(x) solves u'''' - (2 lam + r) u'' + lam (lam + r) u = 35 cos(x)
    # with lam = 4 and r = 2.
    same = tp.CoefficientSet(1.0, 1.0, 2.0, 2.0)
    problem = tp.ModeProblem(
        4.0, same, 0.0, 1.0, 2.0,
        f_minus=lambda x: 35.0 * math.cos(x),
        f_plus=lambda x: 35.0 * math.cos(x),
        phi_minus=(1.0, 0.0),
        phi_plus=(math.cos(2.0), -math.sin(2.0)),
    )
    solution = tp.solve_mode(problem)
    err = max(abs(solution(0.1 * i) - math.cos(0.1 * i)) for i in range(21))
    assert err < 1e-10, err
    assert max(solution.condition_residuals()) < 1e-10
    study = tp.fd_compare(solution, problem, 1.0 / 40.0)
    assert 1.7 <= study["observed_order"] <= 2.3, study

    case2 = tp.CoefficientSet(1.0, 1.0, -0.5, 0.0)
    p2 = tp.ModeProblem(math.pi**2, case2, 0.0, 1.0, 2.0, f_minus=1.0, f_plus=lambda x: x)
    s2 = tp.solve_mode(p2)
    psi1, psi2, _ = tp.psi_via_reduced_system("minus_zero", p2)
    jet = s2.jet(1.0, "minus")
    assert abs(psi1 - jet[0]) <= 1e-6 * (1 + abs(jet[0]))
    assert abs(psi2 - jet[1]) <= 1e-6 * (1 + abs(jet[1]))

    field = tp.solve_field(
        c, 0.0, 1.0, 2.0, 1.0, 8, nx=21, ny=11,
        forcing_minus="y*(1-y)*exp(-x)", phi1_minus="sin(pi*y)",
    )
    assert field["max_interface_residual"] <= 1e-8
    assert field["max_boundary_residual"] <= 1e-8
    assert len(field["u"]) == 21 and len(field["u"][0]) == 11

    text = (ROOT / "configs" / "solve.conf").read_text()
    normalized = tp.normalize_config(text)
    assert tp.normalize_config(normalized) == normalized
    assert tp.mirror_config(tp.mirror_config(text)) == normalized
    with tempfile.TemporaryDirectory() as out:
        code, summary, files = tp.run_config(text, out)
        assert code == 0, summary
        assert any(str(f).endswith("solution.csv") for f in files)

    print("transmission_py smoke test: ok")


if __name__ == "__main__":
    main()
