"""Smoke test for the cxlsim Python extension.

Build first, from the repository root:

    cargo build --release -p cxlsim-py --features extension-module
    cp target/release/libcxlsim.so python/cxlsim.abi3.so

or `maturin develop -m crates/py/Cargo.toml`.
"""

import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import cxlsim  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main() -> None:
    m2s, s2m = cxlsim.mem_bandwidth("68", "MEM_2R1W")
    assert math.isclose(s2m, 2 * m2s, rel_tol=1e-9), (m2s, s2m)
    assert cxlsim.io_bandwidth("256", "read", 1024) > cxlsim.io_bandwidth("256", "read", 1)

    golden = ROOT / "crates/cli/tests/golden/mem-bw-68.csv"
    assert cxlsim.table("mem-bw", "68", csv=True) == golden.read_text()

    fabric = cxlsim.Fabric((ROOT / "scenarios/fabric3.topo").read_text())
    assert fabric.validate() == []
    assert fabric.pid("g0") == 3

    pool = cxlsim.Fabric((ROOT / "scenarios/pool.topo").read_text())
    wl = "host=h0,mix=MEM_2R1W,lines=300;host=h1,mix=MEM_1R1W,lines=300"
    a = pool.simulate(wl, seed=5, trace=True)
    b = pool.simulate(wl, seed=5, trace=True)
    assert a.trace == b.trace and a.to_csv() == b.to_csv()
    assert a.trace[0] == "# rng=ChaCha8 seed=5 flit=F68"
    assert a.get("completed", "h0") == 300.0
    assert ("throughput", "h1") in a.stats()

    stale = (ROOT / "scenarios/pc-stale.trace").read_text()
    assert len(cxlsim.check_trace(stale, "uio")) == 1
    assert cxlsim.check_trace((ROOT / "scenarios/pc-ok.trace").read_text()) == []

    states, witnesses = cxlsim.explore(push_rule=True)
    assert states > 0 and witnesses == []
    _, witnesses = cxlsim.explore(push_rule=False)
    assert witnesses

    for mode in ("68", "256", "lo"):
        assert cxlsim.flit_roundtrip(mode, seed=1, count=200) == 200

    try:
        cxlsim.table("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown table accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
