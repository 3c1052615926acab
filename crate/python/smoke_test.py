"""Smoke test for the Python bindings.

Builds the extension with cargo, imports it from a scratch directory and
exercises generation, the baselines, the metrics and geohash helpers.

    python3 python/smoke_test.py
"""

import importlib.util
import math
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_module(workdir: Path):
    subprocess.run(
        ["cargo", "build", "--release", "-p", "urbantemp-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib_dir = ROOT / "target" / "release"
    candidates = [lib_dir / "liburbantemp_py.so", lib_dir / "liburbantemp_py.dylib", lib_dir / "urbantemp_py.dll"]
    built = next(p for p in candidates if p.exists())
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    target = workdir / f"urbantemp_py{suffix}"
    shutil.copy(built, target)
    spec = importlib.util.spec_from_file_location("urbantemp_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        ut = build_module(tmp)
        assert ut.IN_LEN == 48 and ut.OUT_LEN == 24

        assert ut.rmse([2.0, 4.0], [0.0, 0.0]) == math.sqrt(10.0)
        assert ut.bias([2.0] * 24, [1.0] * 24) == 1.0

        window = [10.0 + 6.0 * math.sin(2 * math.pi * h / 24) for h in range(48)]
        hold = ut.persistence(window)
        assert hold == [window[-1]] * 24
        assert ut.persistence(window, cycle=True) == window[24:]
        assert ut.historical_average(window) == [(window[h] + window[h + 24]) / 2 for h in range(24)]
        order, forecast = ut.arima(window)
        assert len(order) == 3 and len(forecast) == 24

        assert ut.geohash_encode(40.7128, -74.0060) == "dr5regw"
        lat, lon, _, _ = ut.geohash_decode("dr5regw")
        assert abs(lat - 40.7128) < 0.01 and abs(lon + 74.006) < 0.01

        written = ut.synth(str(tmp / "city"), "days = 5\niot_days = 2\nn_iot_cells = 4\n", seed=1)
        names = sorted(Path(p).name for p in written)
        assert "iot.csv" in names and "grid.csv" in names, names

        try:
            ut.persistence([1.0] * 3)
        except ValueError:
            pass
        else:
            raise AssertionError("short window accepted")
        try:
            ut.Model.load(str(tmp / "missing.ckpt"))
        except OSError:
            pass
        else:
            raise AssertionError("missing checkpoint loaded")

    print("python smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
