"""Builds the extension module with cargo and exercises it from Python."""

import importlib.util
import shutil
import subprocess
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "flipcert-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libflipcert_py.so"
    dest = Path(tempfile.mkdtemp()) / "flipcert.so"
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("flipcert", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    fc = build()
    beta = fc.NoiseSpec(7, 10)
    assert repr(beta) == "NoiseSpec(7, 10)"
    assert fc.NoiseSpec.parse("0.7").denom == 10

    regions = fc.region_probabilities(1, 1, beta)
    assert regions[0] == (1, Fraction(7, 10), Fraction(3, 10)), regions
    total = sum(x for _, x, _ in fc.region_probabilities(12, 5, beta))
    assert total == 1
    floats = {m: x for m, x, _ in fc.region_probabilities(40, 3, beta, backend="float")}
    assert floats[40] == (0.0, 0.0)
    lo, hi = floats[3]
    assert Fraction(lo) <= Fraction(343, 1000) <= Fraction(hi), (lo, hi)

    assert fc.certified_perturbation_size(10, fc.NoiseSpec(1, 2), 0.6, 0.4) == 10
    assert fc.certified_perturbation_size(10, beta, 0.4, 0.5) is None
    k = fc.certified_perturbation_size(19716, beta, 0.99, 0.01, backend="float")
    assert k is not None and k >= 1
    assert fc.check_radius(20, 1, beta, 0.9, 0.05)

    q = fc.beta_quantile(0.0005, 1000, 1)
    assert abs(q - 0.0005 ** (1 / 1000)) < 1e-10
    bounds = fc.simultaneous_bounds([950, 40, 10], 0.001)
    assert bounds["label"] == 0 and bounds["pa_lower"] > bounds["pb_upper"]

    builtin = fc.certify("1011001110", "parity", beta, samples=2000, seed=3)
    callable_ = fc.certify(
        "1011001110", lambda batch: [s.count("1") % 2 for s in batch], beta, samples=2000, seed=3
    )
    assert builtin["counts"] == callable_["counts"], (builtin, callable_)
    const = fc.certify("0000000000", "constant:0", beta, samples=10000)
    assert const["certified"] and const["k"] == 10

    try:
        fc.NoiseSpec(3, 2)
    except fc.FlipcertError:
        pass
    else:
        raise AssertionError("invalid noise accepted")
    try:
        fc.certify("0101", lambda batch: [7] * len(batch), beta, samples=10)
    except fc.FlipcertError:
        pass
    else:
        raise AssertionError("out-of-range label accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
