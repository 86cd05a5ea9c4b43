"""Multi-mode continuous-variable QKD with postselection: analytic metrics,
intercept-resend attack profiles, secure key gain and a protocol simulator."""

__version__ = "0.1.0"

from .errors import AccuracyError, ContractError, UndefinedMetricError  # noqa: E402
from .states import Basis, PreparedState  # noqa: E402
from .metrics import (evaluate, iqber, pe_under_attack, postselection_efficiency,  # noqa: E402
                      qber_under_attack)
from .eve import AttackProfile, attack_profile, eve_decision  # noqa: E402
from .keyrate import (SearchSpec, gain_at, loss_table, loss_to_distance,  # noqa: E402
                      optimize_gain, secure_key_gain)
from .sim import SessionConfig, run_session  # noqa: E402

__all__ = [
    "AccuracyError", "ContractError", "UndefinedMetricError", "Basis", "PreparedState",
    "evaluate", "iqber", "pe_under_attack", "postselection_efficiency", "qber_under_attack",
    "AttackProfile", "attack_profile", "eve_decision", "SearchSpec", "gain_at", "loss_table",
    "loss_to_distance", "optimize_gain", "secure_key_gain", "SessionConfig", "run_session",
]
