"""End-to-end with a LIBSVM file: write, parse, partition, run, read back.

Run with ``python demos/05_libsvm_workflow.py``.
"""
import os
import tempfile

from canita import bench, traces
from canita.config import RunConfig
from canita.datasets import PartitionPlan, parse_libsvm, partition, synthesize, write_libsvm
from canita.objectives import LogisticObjective

tmp = tempfile.mkdtemp()
path = os.path.join(tmp, "toy.svm")
with open(path, "w") as fh:
    write_libsvm(synthesize(30, 400, margin=4, seed=2), fh)
print(open(path).readline()[:80], "...")

ds = parse_libsvm(path)
shards = partition(ds, PartitionPlan(8, "shuffled", seed=1))
obj = LogisticObjective(shards)
print(f"{len(ds)} rows, d={ds.d}, shard sizes {[len(s) for s in shards]}, L={obj.L:.3f}")

config = RunConfig(dataset=f"libsvm:{path}", n=8, T=400, compressor="quant:sqrt", partition="shuffled",
                   partition_seed=1, normalize=True)
(out,) = bench.run_to_files(config, tmp)
tr = traces.read_trace(out)
print("trace:", out)
print("provenance:", {k: tr.meta[k] for k in ("config_hash", "code_version", "omega", "schedule_p")})
print("final loss_w:", tr.records[-1].loss_w, "bits:", tr.records[-1].bits_cum)
