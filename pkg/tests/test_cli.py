import csv
import io
import json
import subprocess
import sys

import pytest

from orthwalk.cli import main
from orthwalk.lyapunov import GeometricCertificate
from orthwalk.machine import halting_machine, looping_machine, save_machine
from orthwalk.reduction import LinearCertificate, compile_extended
from orthwalk.walk import kernel_to_json, load_kernel, save_kernel

from conftest import birth_death


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


@pytest.fixture
def files(tmp_path):
    save_machine(halting_machine(), tmp_path / "halt.cm")
    save_machine(looping_machine(), tmp_path / "loop.cm")
    save_kernel(birth_death(), tmp_path / "good.kernel")
    (tmp_path / "bad.kernel").write_text(
        json.dumps({"dimension": 1, "rules": [{"face": [], "delta": [-1], "prob": "1"}]})
    )
    (tmp_path / "q.json").write_text(
        json.dumps({"types": 1, "visits": [1], "slot": 2, "arrival_probs": ["1/2"], "policy": {"priority_order": [1]}})
    )
    return tmp_path


def test_validate_exit_codes(files):
    assert run("walk", "validate", files / "good.kernel")[0] == 0
    code, out = run("walk", "validate", files / "bad.kernel")
    assert code == 1 and "negative move off face" in out
    assert run("walk", "validate", files / "missing.kernel")[0] == 2


def test_bad_p_is_parameter_error(files, capsys):
    code, _ = run("compile", files / "halt.cm", "--p", "2", "-o", files / "x.kernel")
    assert code == 2
    assert "p outside (0,1)" in capsys.readouterr().err
    assert run("compile", files / "halt.cm", "--p", "0.5", "-o", files / "x.kernel")[0] == 2


def test_unknown_command():
    assert run("frobnicate")[0] == 2
    assert run()[0] == 2


def test_compile_then_solve(files):
    kernel = files / "halt.kernel"
    assert run("compile", files / "halt.cm", "--p", "1/2", "-o", kernel)[0] == 0
    code, out = run("stationary", "solve", kernel, "--seed-state", "origin")
    assert code == 0
    assert "pi(origin) = 2/7" in out.splitlines()


def test_emitted_files_round_trip(files):
    kernel = files / "loop.kernel"
    run("compile", files / "loop.cm", "--p", "1/3", "--with-q3", "--strict-steps", "-o", kernel)
    walk = compile_extended(looping_machine(), "1/3", with_q3=True, strict_steps=True)
    assert load_kernel(kernel) == walk.kernel
    assert kernel_to_json(load_kernel(kernel)) == json.loads(kernel.read_text())
    cert = LinearCertificate.from_json(json.loads((files / "loop.cert.json").read_text()))
    assert cert == walk.lyapunov
    manifest = json.loads((files / "loop.kernel.manifest.json").read_text())
    assert manifest["inputs"][str(files / "loop.cm")]
    assert manifest["argv"][0] == "compile"


def test_lyapunov_commands(files):
    kernel = files / "halt.kernel"
    run("compile", files / "halt.cm", "--p", "1/2", "-o", kernel)
    code, out = run("lyapunov", "linear", kernel, "--w", files / "halt.cert.json", "--gamma", "1")
    assert code == 0 and "pass = True" in out
    assert run("lyapunov", "linear", kernel, "--w", "0,1,1,1,1", "--gamma", "1")[0] == 1
    geo = files / "halt.geo.json"
    code, out = run("lyapunov", "geometric", kernel, "--from-linear", files / "halt.cert.json", "-o", geo)
    assert code == 0
    cert = GeometricCertificate.from_json(json.loads(geo.read_text()))
    assert 0 < cert.gamma_g < 1
    code, out = run("lyapunov", "mixing-inputs", kernel, "--cert", geo)
    assert code == 0 and "p_B_min = 0" in out


def test_return_and_ldrate(files):
    kernel = files / "loop.kernel"
    run("compile", files / "loop.cm", "--p", "1/2", "--with-q3", "-o", kernel)
    code, out = run("stationary", "return", kernel, "--horizon", "30")
    assert code == 0 and "mean = 6" in out
    code, out = run("ldrate", kernel, "--v", "0,0,0,0,0,1", "--n-max", "10")
    assert code == 0 and "infinite = False" in out


def test_mc_output_reproducible(files):
    kernel = files / "halt.kernel"
    run("compile", files / "halt.cm", "--p", "1/2", "-o", kernel)
    argv = ("--quiet", "stationary", "return", kernel, "--mode", "mc", "--episodes", "20000", "--seed", "9")
    a, b = run(*argv), run(*argv)
    assert a[0] == 0 and body(a[1]) == body(b[1])
    assert "# seed: 9" in a[1]


def test_approx_command(files):
    kernel = files / "halt.kernel"
    run("compile", files / "halt.cm", "--p", "1/2", "-o", kernel)
    code, out = run("stationary", "approx", kernel, "--heuristic", "--lazy", "--epsilon", "1e-3")
    assert code == 0
    vals = dict(line.split(" = ") for line in body(out))
    assert float(vals["lower"]) <= 2 / 7 <= float(vals["upper"])
    assert vals["certified"] == "False"
    assert run("stationary", "approx", kernel, "--epsilon", "1e-3")[0] == 2


def test_formats(files):
    code, out = run("--format", "json-lines", "cm", "run", files / "halt.cm", "--start", "s0,0,0", "--max-steps", "10")
    lines = [json.loads(x) for x in out.splitlines()]
    assert "manifest" in lines[0] and lines[1] == {"status": "halted", "steps": 2}
    code, out = run("--format", "csv", "queue", "load", files / "q.json")
    rows = list(csv.reader([x for x in body(out)]))
    assert ["rho", "1/4"] in rows


def test_queue_commands(files):
    code, out = run("queue", "embed", files / "q.json", "--analyze")
    assert code == 0 and "pi(empty) = 1" in out
    code, out = run("queue", "sim", files / "q.json", "--horizon", "500", "--seed", "2")
    assert code == 0 and "empty_fraction = 1.0" in out


def test_console_entry_point(files):
    res = subprocess.run(
        [sys.executable, "-m", "orthwalk.cli", "walk", "validate", str(files / "good.kernel")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "valid = True" in res.stdout
