"""Fault-resilient deterministic routing for parallel generalized fat-trees."""

from .analysis import (
    CongestionReport,
    PortLoads,
    analyze_a2a,
    analyze_rp,
    analyze_sp,
    detail_csv,
    reports_csv,
    route_flows,
)
from .harness import (
    BenchRow,
    ExperimentRecord,
    ThrowSpec,
    bench_csv,
    bench_route,
    run_sweep,
    sample_amount,
    sweep_csv,
)
from .preprocess import (
    INF,
    PortGroup,
    RoutingState,
    Validity,
    check_validity,
    costs_csv,
    nids_csv,
    preprocess,
)
from .router import (
    ForwardingTables,
    RouteTrace,
    RoutingError,
    compute_dmodc,
    compute_updn_baseline,
    load_lft,
    trace,
)
from .topology import (
    FabricError,
    Node,
    ParseError,
    PgftParams,
    Switch,
    Topology,
    TopologyError,
    build_pgft,
    degrade,
    load,
    restore,
    save,
)

__version__ = "0.1.0"
