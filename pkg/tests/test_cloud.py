import dataclasses
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcloudsim.cloud import (
    Broker,
    CatalogError,
    NodeCatalog,
    QNode,
    QTask,
    UnknownNodeModel,
    backlog,
    clone_node,
    create_ibmq_node,
    estimate_execution_time,
    submit,
)
from qcloudsim.engine import Engine

BUILTIN_ROWS = {
    "washington": (127, 64, 850, 16967.5),
    "kolkata": (27, 128, 2000, 39900),
    "hanoi": (27, 64, 2300, 45935),
    "perth": (7, 32, 2900, 57905),
    "lagos": (7, 32, 2700, 53865),
}


def make_task(task_id=0, arrival=0.0, qubits=5, depth=100, shots=1000, tag="t"):
    return QTask(task_id, arrival, qubits, depth, shots, tag)


class TestCatalog:
    def test_builtin_rows_exact(self):
        for name, (qubits, qv, clops, d1cps) in BUILTIN_ROWS.items():
            node = create_ibmq_node(name)
            assert (node.qubit_count, node.quantum_volume, node.clops, node.d1cps) == (
                qubits,
                qv,
                clops,
                d1cps,
            )
            assert node.next_free_at == 0.0
            assert node.fifo_queue == []

    def test_unknown_model_rejected(self):
        with pytest.raises(UnknownNodeModel):
            create_ibmq_node("toronto")

    def test_user_catalog_round_trip(self, tmp_path):
        catalog = NodeCatalog.default()
        path = tmp_path / "catalog.json"
        catalog.to_json(path)
        loaded = NodeCatalog.from_json(path)
        assert loaded.entries == catalog.entries

    def test_catalog_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text(
            json.dumps([{"name": "a", "qubits": 5, "qv": 8, "clops": 100, "d1cps": 50, "color": "blue"}])
        )
        with pytest.raises(CatalogError, match="unknown keys"):
            NodeCatalog.from_json(path)

    def test_catalog_rejects_missing_keys(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps([{"name": "a", "qubits": 5}]))
        with pytest.raises(CatalogError, match="missing keys"):
            NodeCatalog.from_json(path)

    def test_duplicate_names_rejected(self):
        entry = NodeCatalog.default().entries[0]
        with pytest.raises(CatalogError):
            NodeCatalog([entry, entry])

    def test_custom_catalog_feeds_create(self):
        catalog = NodeCatalog(
            [dataclasses.replace(NodeCatalog.default().entries[0], name="mine", qubits=9)]
        )
        node = create_ibmq_node("mine", node_id=3, catalog=catalog)
        assert node.qubit_count == 9
        assert node.id == 3


class TestExecutionTime:
    def test_hanoi_reference_value(self):
        node = create_ibmq_node("hanoi")
        est = estimate_execution_time(make_task(depth=100, shots=1000), node)
        assert est == pytest.approx(100000 / 45935, abs=1e-9)

    def test_zero_depth_is_zero_seconds(self):
        node = create_ibmq_node("perth")
        assert estimate_execution_time(make_task(qubits=2, depth=0, shots=7), node) == 0.0

    def test_washington_exact_two_seconds(self):
        node = create_ibmq_node("washington")
        assert estimate_execution_time(make_task(depth=33935, shots=1), node) == 2.0

    @given(
        depth=st.integers(min_value=0, max_value=5000),
        shots=st.integers(min_value=1, max_value=5000),
        k=st.integers(min_value=1, max_value=50),
    )
    def test_linear_in_shots_and_depth(self, depth, shots, k):
        node = create_ibmq_node("kolkata")
        base = estimate_execution_time(make_task(depth=depth, shots=shots), node)
        assert estimate_execution_time(make_task(depth=depth, shots=k * shots), node) == pytest.approx(
            k * base, rel=1e-9
        )
        assert estimate_execution_time(make_task(depth=k * depth, shots=shots), node) == pytest.approx(
            k * base, rel=1e-9
        )


class TestSubmit:
    def test_idle_node(self):
        node = QNode(0, "n", 27, 64, 2300, 45935)
        task = make_task(arrival=10.0, depth=91870, shots=1)  # exec = 2 s exactly
        record = submit(task, node, at=10.0)
        assert record.success
        assert record.wait_s == 0.0
        assert record.exec_s == 2.0
        assert record.completion_s == 2.0
        assert node.next_free_at == 12.0

    def test_busy_node_queues_fifo(self):
        node = QNode(0, "n", 27, 64, 2300, 45935, next_free_at=13.0)
        task = make_task(arrival=9.0, depth=91870, shots=1)
        record = submit(task, node, at=10.0)
        assert record.start_at == 13.0
        assert record.wait_s == 3.0
        assert record.completion_s == 5.0
        assert node.next_free_at == 15.0

    def test_capacity_violation_is_in_band_failure(self):
        node = create_ibmq_node("perth")
        record = submit(make_task(qubits=12), node, at=0.0)
        assert not record.success
        assert record.start_at is None
        assert record.wait_s is None
        assert record.exec_s is None
        assert record.completion_s is None

    def test_failed_submit_leaves_node_bit_identical(self):
        node = create_ibmq_node("perth")
        submit(make_task(task_id=1, qubits=3, depth=50), node, at=0.0)
        snapshot = clone_node(node)
        record = submit(make_task(task_id=2, qubits=12), node, at=1.0)
        assert not record.success
        assert node == snapshot

    def test_dispatch_before_arrival_rejected(self):
        node = create_ibmq_node("hanoi")
        with pytest.raises(ValueError):
            submit(make_task(arrival=5.0), node, at=4.0)

    def test_events_scheduled_on_engine(self):
        eng = Engine()
        node = create_ibmq_node("hanoi")
        record = submit(make_task(depth=91870, shots=1), node, at=0.0, engine=eng)
        eng.run_all()
        payloads = [f.payload for f in eng.fired_log]
        assert ("execution-start", 0, node.id) in payloads
        assert ("execution-complete", 0, node.id) in payloads
        start = next(f.fired_at for f in eng.fired_log if f.payload[0] == "execution-start")
        complete = next(f.fired_at for f in eng.fired_log if f.payload[0] == "execution-complete")
        assert start == record.start_at
        assert complete == record.start_at + record.exec_s

    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=1, max_value=30),  # qubits
                st.integers(min_value=0, max_value=2000),  # depth
                st.integers(min_value=1, max_value=64),  # shots
                st.floats(min_value=0.0, max_value=50.0, allow_nan=False),  # dispatch gap
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_fifo_no_overlap_and_conservation(self, specs):
        node = QNode(0, "n", 27, 64, 2300, 45935)
        at = 0.0
        records = []
        for i, (qubits, depth, shots, gap) in enumerate(specs):
            at += gap
            record = submit(QTask(i, 0.0, qubits, depth, shots), node, at=at)
            if record.success:
                records.append(record)
        for record in records:
            assert record.completion_s == record.wait_s + record.exec_s
            assert record.wait_s >= 0.0
        for a, b in zip(records, records[1:]):
            assert b.start_at >= a.start_at + a.exec_s

    @given(qubits=st.integers(min_value=1, max_value=200))
    def test_capacity_monotonicity(self, qubits):
        # A task failing on a node must fail on every smaller node.
        nodes = NodeCatalog.default().build_nodes()
        task = make_task(qubits=qubits)
        outcomes = {n.id: submit(task, clone_node(n), at=0.0).success for n in nodes}
        for n in nodes:
            if not outcomes[n.id]:
                for m in nodes:
                    if m.qubit_count <= n.qubit_count:
                        assert not outcomes[m.id]


class TestBacklogAndBroker:
    def test_backlog_clamps_at_zero(self):
        node = create_ibmq_node("lagos")
        assert backlog(node, at=0.0) == 0.0
        node.next_free_at = 15.0
        assert backlog(node, at=10.0) == 5.0
        node.next_free_at = 10.0
        assert backlog(node, at=12.0) == 0.0

    def test_broker_records_every_attempt(self):
        eng = Engine()
        broker = Broker(eng, NodeCatalog.default().build_nodes())
        ok = broker.submit(make_task(task_id=0, qubits=5, depth=10), 0, at=0.0)
        bad = broker.submit(make_task(task_id=1, qubits=12), 3, at=0.0)  # perth: 7 qubits
        assert [r.success for r in broker.records] == [True, False]
        assert ok.node_id == 0 and bad.node_id == 3

    def test_broker_checks_node_index(self):
        broker = Broker(Engine(), NodeCatalog.default().build_nodes())
        with pytest.raises(IndexError):
            broker.submit(make_task(), 5, at=0.0)
