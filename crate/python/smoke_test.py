"""Smoke test for the `wander` Python extension.

Run from the repository root:

    python3 python/smoke_test.py

If `wander` is not importable, the extension is built with cargo and loaded
from a temporary directory.
"""

import importlib
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_wander():
    try:
        return importlib.import_module("wander")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "wander-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libwander.so")
    if sys.platform == "darwin":
        lib = os.path.join(ROOT, "target", "release", "libwander.dylib")
    tmp = tempfile.mkdtemp(prefix="wander-")
    shutil.copy(lib, os.path.join(tmp, "wander.so"))
    sys.path.insert(0, tmp)
    return importlib.import_module("wander")


def main():
    wander = load_wander()

    half = wander.Poly([0, 0.5])
    assert abs(half(2 + 2j) - (1 + 1j)) < 1e-15
    assert wander.classify(half, 5j, 0j) == "converges"
    assert [wander.schedule(k) for k in range(1, 5)] == [1, 3, 6, 10]

    square = wander.Poly([0, 0, 1])
    assert wander.univalent_on_disk(square, 1 + 0j, 0.5)
    assert not wander.univalent_on_disk(square, 0j, 0.5)

    config = {
        "mode": "escaping",
        "region": {"type": "polygon", "vertices": [[0, 0], [0.1, 0], [0.1, 0.1], [0, 0.1]]},
        "K": 1,
        "h": 0.0005,
        "N": 3,
    }
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "scenario.json")
        with open(path, "w") as fh:
            json.dump(config, fh)
        out = os.path.join(tmp, "out")
        code = wander.construct(path, out)
        assert code == 0, f"construct exited with {code}"
        report = json.load(open(os.path.join(out, "report.json")))
        assert report["all_passed"] and report["degrees"], report["error"]
        passed, rows = wander.verify(os.path.join(out, "f_1.poly"), path)
        assert passed, [r for r in rows if not r[1]]
        f1 = wander.Poly.load(os.path.join(out, "f_1.poly"))
        assert abs(f1(0j)) < 1e-10
        assert abs(f1.derivative()(0j) - 0.5) < 1e-10

    image = wander.render_basin(half, 0j, (-1.0, 1.0, -1.0, 1.0), 0.1)
    assert image.startswith(b"P6")
    print("smoke test passed")


if __name__ == "__main__":
    main()
