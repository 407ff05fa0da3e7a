"""Accelerated compressed-gradient methods for distributed convex optimization.

CANITA, DIANA and QSGD engines over a simulated multi-machine network, with
unbiased compressors, theoretical schedules and communication-bit accounting.
"""

__version__ = "0.1.0"

from .compressors import CompressorSpec, RngStream, compress, message_bits, omega, parse_compressor
from .objectives import LogisticObjective, QuadraticObjective, Shard, local_gradient, local_loss, smoothness_constant
from .datasets import PartitionPlan, RawDataset, parse_libsvm, partition, synthesize, write_libsvm
from .schedule import ScheduleParams, RoundParams, generate, round_params, theorem2_params, validate_theorem1
from .optim import (ServerState, WorkerState, TraceRecord, Trace, canita_round, diana_round, qsgd_round,
                    init_states, run, run_engine, potential_monitor, reference_optimum)
from .config import RunConfig
