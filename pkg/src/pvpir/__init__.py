"""Multi-server private information retrieval with publicly verifiable answers.

Three verified schemes (two predicate-aggregate, one point-retrieval) plus
an unverified baseline share a common keygen/query/answer/reconstruct
pipeline over additively shared functions, with a TCP transport, a
standalone verifier, a tampering-adversary harness, and a benchmark suite.
"""

from .bench import (
    BENCH_HEADER,
    BenchRecord,
    bench_bandwidth,
    bench_point_time,
    bench_relative_overhead,
    merkle_proof_bytes,
)
from .client import ClientResult, TcpEndpoint, TransportError, run_client
from .fss import (
    FunctionDescription,
    IntVector,
    OutputGroup,
    PRG_LAMBDA,
    fss_eval,
    fss_eval_full,
    fss_gen,
)
from .groups import DlGroup, RsaKeyPair, gen_dl_group, gen_rsa_keypair, pow_mod
from .harness import (
    ExperimentRecord,
    TamperStrategy,
    calibration_keys,
    chi2_sf,
    fss_distinguish_probe,
    run_exp_ver,
    run_selective_failure_probe,
    tamper_answer,
    two_proportion_z,
)
from .profiles import PAPER, Profile, TOY, get_profile
from .protocol import (
    AnswerPair,
    DatabaseView,
    PublicKeys,
    QueryShare,
    REJECT,
    SCHEME_NAMES,
    SCHEMES_BY_NAME,
    SchemeId,
    SchemeKeys,
    SecretKeys,
    VERIFIED_SCHEMES,
    WeightVector,
    answer,
    keygen,
    make_database,
    plain_aggregate,
    point_query_build,
    predicate_query_build,
    query,
    reconstruct,
)
from .server import LoopbackServer, ServerConfig, ServerState, serve, start_server
from .verifier import NotVerifiableError, verify_files, verify_standalone

__version__ = "0.1.0"

__all__ = [
    "AnswerPair", "BENCH_HEADER", "BenchRecord", "ClientResult", "DatabaseView",
    "DlGroup", "ExperimentRecord", "FunctionDescription", "IntVector",
    "LoopbackServer", "NotVerifiableError", "OutputGroup", "PAPER", "PRG_LAMBDA",
    "Profile", "PublicKeys", "QueryShare", "REJECT", "RsaKeyPair",
    "SCHEME_NAMES", "SCHEMES_BY_NAME", "SchemeId", "SchemeKeys", "SecretKeys",
    "ServerConfig", "ServerState", "TOY", "TamperStrategy", "TcpEndpoint",
    "TransportError", "VERIFIED_SCHEMES", "WeightVector", "answer",
    "bench_bandwidth", "bench_point_time", "bench_relative_overhead",
    "calibration_keys", "chi2_sf", "fss_distinguish_probe", "fss_eval",
    "fss_eval_full", "fss_gen", "gen_dl_group", "gen_rsa_keypair",
    "get_profile", "keygen", "make_database", "merkle_proof_bytes",
    "plain_aggregate", "point_query_build", "pow_mod", "predicate_query_build",
    "query", "reconstruct", "run_client", "run_exp_ver",
    "run_selective_failure_probe", "serve", "start_server", "tamper_answer",
    "two_proportion_z", "verify_files", "verify_standalone",
]
