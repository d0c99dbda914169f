import socket
import sys
import threading

import numpy as np
import pytest

from abranch.branches import (AccuracyProfile, ApproxBranch, BranchCatalog, LatencyProfile,
                              ProfileSet, SwitchCostMatrix)
from abranch.executor import (ContentionTrace, ExternalExecutor, InferenceTimeout, ProtocolChannel,
                              ProtocolError, ResponderError, SimExecutorConfig, SimFixture,
                              SimulatedExecutor, contention_at, load_contention, parse_response,
                              simulate_inference, store_contention)

from oracles import binomial_se

A, B = ApproxBranch(128, 1), ApproxBranch(96, 1)
CAT = BranchCatalog((A, B))
LABELS = tuple(f"c{i}" for i in range(10))


def profiles(p=0.8, switch=((0.0, 4.0), (2.5, 0.0))):
    return ProfileSet(AccuracyProfile(CAT, [[p, p], [p, p]]),
                      LatencyProfile(CAT, [[20.0, 30.0], [10.0, 12.0]]),
                      SwitchCostMatrix(CAT, switch))


def executor(p=0.8, jitter=0.02, seed=0):
    return SimulatedExecutor(profiles(p), SimExecutorConfig(seed=seed, jitter=jitter, labels=LABELS))


TRUTH = frozenset({"c3"})


@pytest.mark.parametrize("p,expect", [(1.0, True), (0.0, False)])
def test_degenerate_accuracy(p, expect):
    for seed in range(5):
        ex = executor(p, seed=seed)
        for _ in range(50):
            r = ex.infer(A, labels=TRUTH, level=0)
            assert ("c3" in r.top5) is expect
            assert len(r.top5) == 5 and len(set(r.top5)) == 5


def test_table4a_latency_at_jitter_zero(table4a):
    ex = table4a.executor(seed=3, jitter=0.0)
    assert ex.infer(ApproxBranch(128, 4), level=0).infer_ms == 31.42


def test_determinism():
    def seq(seed):
        ex = executor(seed=seed)
        out = []
        for i in range(200):
            out.append(ex.infer(A if i % 7 else B, labels=TRUTH, level=i % 2))
        return out
    assert seq(11) == seq(11)
    assert seq(11) != seq(12)


def test_calibration_and_jitter_mean():
    n = 10_000
    ex = executor(0.8, jitter=0.05, seed=5)
    res = [ex.infer(A, labels=TRUTH, level=1) for _ in range(n)]
    hits = sum("c3" in r.top5 for r in res) / n
    assert abs(hits - 0.8) <= 3 * binomial_se(0.8, n)
    lat = np.array([r.infer_ms for r in res])
    assert abs(lat.mean() - 30.0) <= 3 * 0.05 * 30.0 / np.sqrt(n)
    assert lat.min() >= 30.0 * (1 - 3 * 0.05) and lat.max() <= 30.0 * (1 + 3 * 0.05)
    ex0 = executor(0.8, jitter=0.0)
    assert all(ex0.infer(A, level=1).infer_ms == 30.0 for _ in range(100))


def test_switch_cost_only_on_change():
    ex = executor(jitter=0.0)
    seq = [A, A, B, B, A, B, B]
    out = [ex.infer(b, level=0) for b in seq]
    assert [r.switch_ms for r in out] == [0.0, 0.0, 4.0, 0.0, 2.5, 4.0, 0.0]
    assert out[2].latency_ms == 14.0


def test_out_of_range():
    ex = executor()
    with pytest.raises(IndexError):
        ex.infer(A, level=2)
    with pytest.raises(KeyError):
        ex.infer(ApproxBranch(224, 1), level=0)


def test_config_validation():
    with pytest.raises(ValueError):
        SimExecutorConfig(jitter=-0.1)
    with pytest.raises(ValueError):
        SimExecutorConfig(labels=("only",))


def test_contention_at():
    assert contention_at(ContentionTrace(((0, 0),)), 12345) == 0
    t = ContentionTrace(((0, 0), (300, 5)))
    assert contention_at(t, 299) == 0 and contention_at(t, 300) == 5
    assert contention_at(ContentionTrace(((0, 2), (100, 7), (200, 1))), 150) == 7
    with pytest.raises(ValueError):
        ContentionTrace(((5, 1),))
    with pytest.raises(ValueError):
        ContentionTrace(((0, 1), (10, 2), (10, 3)))


def test_contention_round_trip(tmp_path):
    t = ContentionTrace(((0, 2), (100, 7), (200, 1)))
    store_contention(t, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "start_frame,level"
    assert load_contention(tmp_path / "c.csv") == t


def test_fixture_json_round_trip(tmp_path, table4a):
    table4a.save(tmp_path / "f.json")
    back = SimFixture.load(tmp_path / "f.json")
    assert back.profiles == table4a.profiles
    assert back.boundaries == table4a.boundaries and back.labels == table4a.labels


def test_parse_response():
    lat, labels = parse_response("OK 26.84 car,bus,truck,van,bike")
    assert lat == 26.84 and labels == ("car", "bus", "truck", "van", "bike")
    with pytest.raises(ResponderError, match="no-model"):
        parse_response("ERR no-model")
    for bad in ("HELLO", "OK", "OK abc car", "OK 1.0 a,b,c,d,e,f", "OK -1 car", "ERRx"):
        with pytest.raises(ProtocolError):
            parse_response(bad)


def serve(sock, replies):
    f = sock.makefile("rwb", buffering=0)
    for reply in replies:
        line = f.readline()
        if not line:
            break
        if reply is not None:
            f.write(reply)


@pytest.fixture
def pair():
    a, b = socket.socketpair()
    yield a, b
    a.close()
    b.close()


def run_with(pair, replies, timeout_ms=2000.0):
    client, server = pair
    t = threading.Thread(target=serve, args=(server, replies), daemon=True)
    t.start()
    chan = ProtocolChannel.from_socket(client, timeout_ms)
    ex = ExternalExecutor(chan, CAT)
    return ex


def test_socket_ok(pair):
    ex = run_with(pair, [b"OK 12.5 a,b,c,d,e\n"])
    r = ex.infer(A, path="frames/f000001.ppm")
    assert r.top5 == ("a", "b", "c", "d", "e")
    assert r.reported_ms == 12.5 and r.infer_ms > 0


def test_socket_err_and_garbled(pair):
    ex = run_with(pair, [b"ERR no-model\n", b"what?\n"])
    with pytest.raises(ResponderError):
        ex.infer(A, path="x.ppm")
    with pytest.raises(ProtocolError):
        ex.infer(A, path="x.ppm")


def test_socket_timeout(pair):
    ex = run_with(pair, [None], timeout_ms=50.0)
    with pytest.raises(InferenceTimeout):
        ex.infer(A, path="x.ppm")


RESPONDER = r"""
import sys
for line in sys.stdin:
    parts = line.split()
    sys.stdout.write(f"OK {int(parts[1]) / 10:.2f} a,b,c,d,e\n" if parts[0] == "INFER" else "ERR bad\n")
    sys.stdout.flush()
"""


def test_spawned_responder(tmp_path):
    script = tmp_path / "responder.py"
    script.write_text(RESPONDER)
    chan = ProtocolChannel.open(f"exec:{sys.executable} {script}")
    try:
        r = ExternalExecutor(chan, CAT).infer(A, path="f.ppm")
        assert r.reported_ms == 12.8
    finally:
        chan.close()


def test_simulate_inference_function_matches_executor():
    ps = profiles()
    cfg = SimExecutorConfig(seed=9, labels=LABELS)
    rng = np.random.default_rng(9)
    direct = simulate_inference(A, TRUTH, 1, 0, None, ps, cfg, rng)
    assert SimulatedExecutor(ps, cfg).infer(A, labels=TRUTH, level=0, category=1) == direct
