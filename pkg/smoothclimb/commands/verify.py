"""verify: statistical and exact checks of the mirror-policy identities on hill-car.

Every check compares a Monte-Carlo or closed-form quantity against the configured
tolerance and records its statistic, so a failing run still leaves a full report.
"""

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from smoothclimb.commands.common import VERIFY_STREAM, CommandResult, Experiment, result_header
from smoothclimb.config import ExperimentConfig, VerifyConfig
from smoothclimb.core.continuation import (
    ConstantParamCovariance,
    CovarianceFn,
    StateRadialCovariance,
    TimeDecayCovariance,
    compose_continuations,
    estimate_continuation,
    mirror_of_deterministic,
    mirror_of_deterministic_history,
    mirror_of_gaussian,
    recover_continuation_cov,
    sample_mirror_mixture,
)
from smoothclimb.core.linalg import is_loewner_geq, sandwich
from smoothclimb.core.mdp import History, estimate_return, truncation_bias_bound
from smoothclimb.core.policy import (
    AffineMean,
    ConstantCovariance,
    ConstantFeatures,
    DeterministicAffinePolicy,
    GaussianAffinePolicy,
    Policy,
    k_controller,
)
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.results import write_json

# Exact identities are checked relative to the matrix scale
EXACT_TOLERANCE = 1e-12
MAX_FEATURE_CONDITION = 1e2
HISTORY_DEPTHS = (0, 10)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check: passed iff statistic <= threshold (and any p-value test)."""

    name: str
    family: str
    passed: bool
    statistic: float
    threshold: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def continuation_variants(vcfg: VerifyConfig, x_target: float) -> list[CovarianceFn]:
    """The three Λ families used by the return-equality checks."""
    return [
        ConstantParamCovariance(np.array([[vcfg.constant_lambda]])),
        StateRadialCovariance(vcfg.radial_sigma, x_target),
        TimeDecayCovariance(np.array([[vcfg.time_decay_lambda]]), vcfg.time_decay_beta),
    ]


def mirror_for(original: DeterministicAffinePolicy, lam: CovarianceFn) -> Policy:
    """Markov mirror when Λ is state-only, history-dependent mirror otherwise."""
    if lam.state_only:
        return mirror_of_deterministic(original, lam)
    return mirror_of_deterministic_history(original, lam)


def resting_history(positions: list[float], depth: int = 0) -> History:
    """Resting car at each check position, with ``depth`` earlier identical steps."""
    x = np.asarray(positions, dtype=float)
    state = np.stack([x, np.zeros_like(x)], axis=-1)
    states = np.repeat(state[:, None, :], depth + 1, axis=1)
    actions = np.zeros((x.shape[0], depth, 1))
    return History.from_arrays(states, actions)


def _middle_theta(vcfg: VerifyConfig) -> float:
    return float(vcfg.thetas[len(vcfg.thetas) // 2])


def check_return_equality(
    experiment: Experiment, vcfg: VerifyConfig, stream: RandomStream
) -> list[CheckResult]:
    """Continuation of the controller's return vs. the plain return of its mirror."""
    results = []
    n = vcfg.n_rollouts
    for i, lam in enumerate(continuation_variants(vcfg, experiment.x_target)):
        perturbed_lam = lam.scaled(vcfg.lambda_mismatch) if vcfg.lambda_mismatch != 1 else lam
        for j, theta in enumerate(vcfg.thetas):
            original = experiment.controller(theta)
            sub = stream.child(i).child(j)
            continuation = estimate_continuation(
                experiment.mdp, original, original.theta, perturbed_lam, n, sub.child(0),
                experiment.executor,
            )
            mirror = estimate_return(
                experiment.mdp, mirror_for(original, lam), n, sub.child(1), experiment.executor
            )
            z = continuation.z_score(mirror)
            results.append(
                CheckResult(
                    name=f"return_equality[{lam.variant}, θ={theta}]",
                    family="return_equality",
                    passed=z <= vcfg.tolerance_se,
                    statistic=z,
                    threshold=vcfg.tolerance_se,
                    details={
                        "variant": lam.variant,
                        "theta": float(theta),
                        "continuation_mean": continuation.mean,
                        "continuation_stderr": continuation.stderr,
                        "mirror_mean": mirror.mean,
                        "mirror_stderr": mirror.stderr,
                        "n": n,
                        "lambda_mismatch": vcfg.lambda_mismatch,
                    },
                )
            )
    return results


def check_markov_sufficiency(
    experiment: Experiment, vcfg: VerifyConfig, stream: RandomStream
) -> list[CheckResult]:
    """With a state-only Λ, mixture actions depend on the last state only."""
    theta = _middle_theta(vcfg)
    lam = StateRadialCovariance(vcfg.radial_sigma, experiment.x_target)
    original = experiment.controller(theta)
    alpha = vcfg.ks_alpha / len(vcfg.check_positions)
    params = experiment.params
    results = []

    for i, x in enumerate(vcfg.check_positions):
        # two different pasts ending at the same state
        last = [x, 0.0]
        early = History.from_arrays(
            np.array([[[params.x_min, 0.0], last]]), np.array([[[params.action_max]]])
        )
        late = History.from_arrays(
            np.array([[[params.x_max, 1.0], [0.0, -1.0], last]]),
            np.array([[[params.action_min], [0.0]]]),
        )
        sub = stream.child(i)
        a = sample_mirror_mixture(original, original.theta, lam, early, vcfg.mixture_samples,
                                  sub.child(0))
        b = sample_mirror_mixture(original, original.theta, lam, late, vcfg.mixture_samples,
                                  sub.child(1))
        test = stats.ks_2samp(a[:, 0, 0], b[:, 0, 0])
        results.append(
            CheckResult(
                name=f"markov_sufficiency[x={x}]",
                family="markov_sufficiency",
                passed=bool(test.pvalue >= alpha),
                statistic=float(test.statistic),
                threshold=float(alpha),
                details={"ks_pvalue": float(test.pvalue), "m": vcfg.mixture_samples},
            )
        )
    return results


def _moment_checks(
    family: str,
    original: Policy,
    lam: CovarianceFn,
    history: History,
    closed_form: np.ndarray,
    vcfg: VerifyConfig,
    stream: RandomStream,
    label: str = "",
) -> list[CheckResult]:
    """Mixture sample mean/variance/KS at each check state against N(μ_θ(s), Σ′)."""
    m = vcfg.mixture_samples
    samples = sample_mirror_mixture(original, original.theta, lam, history, m, stream)
    means = original.mean_action(history)
    alpha = vcfg.ks_alpha / history.n
    results = []

    for i in range(history.n):
        x = samples[:, i, 0]
        mu = float(means[i, 0])
        var = float(closed_form[i, 0, 0])
        z_mean = abs(float(np.mean(x)) - mu) / np.sqrt(var / m)
        z_var = abs(float(np.var(x, ddof=1)) - var) / (var * np.sqrt(2.0 / (m - 1)))
        pvalue = float(stats.kstest(x, "norm", args=(mu, np.sqrt(var))).pvalue)
        statistic = float(max(z_mean, z_var))
        position = float(history.last_state[i, 0])
        results.append(
            CheckResult(
                name=f"{family}[{label}x={position}]",
                family=family,
                passed=bool(statistic <= vcfg.moment_tolerance_se and pvalue >= alpha),
                statistic=statistic,
                threshold=vcfg.moment_tolerance_se,
                details={
                    "z_mean": float(z_mean),
                    "z_var": float(z_var),
                    "ks_pvalue": pvalue,
                    "ks_alpha": float(alpha),
                    "closed_form_mean": mu,
                    "closed_form_var": var,
                    "m": m,
                },
            )
        )
    return results


def check_mirror_moments(
    experiment: Experiment, vcfg: VerifyConfig, stream: RandomStream
) -> list[CheckResult]:
    """Closed-form mirror covariances against the parameter-perturbation mixture."""
    theta = _middle_theta(vcfg)
    x_target = experiment.x_target
    history = resting_history(vcfg.check_positions)
    results = []

    # deterministic original, state-only Λ
    original = experiment.controller(theta)
    lam = StateRadialCovariance(vcfg.radial_sigma, x_target)
    mirror = mirror_of_deterministic(original, lam)
    results += _moment_checks(
        "mirror_moments_deterministic", original, lam, history,
        mirror.action_covariance(history), vcfg, stream.child(0),
    )

    # Gaussian original: Σ′ = Σ + φᵀΛφ exactly
    gaussian = k_controller(theta, x_target, vcfg.gaussian_sigma)
    lam = ConstantParamCovariance(np.array([[vcfg.constant_lambda]]))
    mirror = mirror_of_gaussian(gaussian, lam)
    states = history.last_state
    expected = gaussian.state_covariance(states) + sandwich(
        gaussian.mean.features(states), lam.at_states(states)
    )
    actual = mirror.state_covariance(states)
    error = float(np.max(np.abs(actual - expected)) / max(1.0, float(np.max(np.abs(expected)))))
    results.append(
        CheckResult(
            name="exact_gaussian_mirror",
            family="exact_gaussian_mirror",
            passed=error <= EXACT_TOLERANCE,
            statistic=error,
            threshold=EXACT_TOLERANCE,
        )
    )
    results += _moment_checks(
        "mirror_moments_gaussian", gaussian, lam, history,
        mirror.action_covariance(history), vcfg, stream.child(1),
    )

    # history-dependent Λ: Σ′(h) = φᵀΛ(h)φ at several history lengths
    lam = TimeDecayCovariance(np.array([[vcfg.time_decay_lambda]]), vcfg.time_decay_beta)
    mirror = mirror_of_deterministic_history(original, lam)
    for k, depth in enumerate(HISTORY_DEPTHS):
        deep = resting_history(vcfg.check_positions, depth)
        results += _moment_checks(
            "mirror_moments_history", original, lam, deep,
            mirror.action_covariance(deep), vcfg, stream.child(2).child(k), label=f"t={depth}, ",
        )
    return results


def _random_instance(gen: np.random.Generator, max_dim: int):
    param_dim = int(gen.integers(1, max_dim + 1))
    action_dim = int(gen.integers(1, param_dim + 1))
    while True:
        phi = gen.standard_normal((param_dim, action_dim))
        if np.linalg.cond(phi) <= MAX_FEATURE_CONDITION:
            break
    root = gen.standard_normal((action_dim, action_dim))
    sigma_prime = root @ root.T + 0.1 * np.eye(action_dim)
    mean = AffineMean(ConstantFeatures(phi), param_dim=param_dim, action_dim=action_dim)
    return mean, sigma_prime


def check_recovery_roundtrip(vcfg: VerifyConfig, stream: RandomStream) -> list[CheckResult]:
    """Recover Λ from a mirror covariance and rebuild the mirror from it."""
    gen = stream.generator()
    state = np.zeros((1, 2))
    worst_deterministic = 0.0
    worst_gaussian = 0.0

    for _ in range(vcfg.roundtrip_instances):
        mean, sigma_prime = _random_instance(gen, vcfg.roundtrip_max_dim)
        theta = np.zeros(mean.param_dim)
        scale = max(1.0, float(np.max(np.abs(sigma_prime))))
        mirror = GaussianAffinePolicy(mean, ConstantCovariance(sigma_prime), theta)

        lam = recover_continuation_cov(mirror, state)[0]
        rebuilt = mirror_of_deterministic(
            DeterministicAffinePolicy(mean, theta), ConstantParamCovariance(lam)
        ).state_covariance(state)[0]
        worst_deterministic = max(
            worst_deterministic, float(np.max(np.abs(rebuilt - sigma_prime))) / scale
        )

        sigma = 0.5 * sigma_prime
        lam = recover_continuation_cov(mirror, state, original_cov=sigma)[0]
        rebuilt = mirror_of_gaussian(
            GaussianAffinePolicy(mean, ConstantCovariance(sigma), theta),
            ConstantParamCovariance(lam),
        ).state_covariance(state)[0]
        worst_gaussian = max(worst_gaussian, float(np.max(np.abs(rebuilt - sigma_prime))) / scale)

    details = {"instances": vcfg.roundtrip_instances, "max_dim": vcfg.roundtrip_max_dim}
    return [
        CheckResult(
            name="recovery_roundtrip_deterministic",
            family="recovery_roundtrip",
            passed=worst_deterministic <= vcfg.roundtrip_tolerance,
            statistic=worst_deterministic,
            threshold=vcfg.roundtrip_tolerance,
            details=details,
        ),
        CheckResult(
            name="recovery_roundtrip_gaussian",
            family="recovery_roundtrip",
            passed=worst_gaussian <= vcfg.roundtrip_tolerance,
            statistic=worst_gaussian,
            threshold=vcfg.roundtrip_tolerance,
            details=details,
        ),
    ]


def check_composition(
    experiment: Experiment, vcfg: VerifyConfig, stream: RandomStream
) -> list[CheckResult]:
    """Mirror of the mirror equals the continuation under 2Λ."""
    lam = StateRadialCovariance(vcfg.radial_sigma, experiment.x_target)
    doubled = compose_continuations(lam)
    results = []
    for j, theta in enumerate(vcfg.composition_thetas):
        original = experiment.controller(theta)
        twice = mirror_of_gaussian(mirror_of_deterministic(original, lam), lam)
        sub = stream.child(j)
        continuation = estimate_continuation(
            experiment.mdp, original, original.theta, doubled, vcfg.n_rollouts, sub.child(0),
            experiment.executor,
        )
        mirrored = estimate_return(
            experiment.mdp, twice, vcfg.n_rollouts, sub.child(1), experiment.executor
        )
        z = continuation.z_score(mirrored)
        results.append(
            CheckResult(
                name=f"composition[θ={theta}]",
                family="composition",
                passed=z <= vcfg.tolerance_se,
                statistic=z,
                threshold=vcfg.tolerance_se,
                details={
                    "theta": float(theta),
                    "continuation_mean": continuation.mean,
                    "continuation_stderr": continuation.stderr,
                    "mirror_mean": mirrored.mean,
                    "mirror_stderr": mirrored.stderr,
                    "n": vcfg.n_rollouts,
                },
            )
        )
    return results


def check_loewner_monotonicity(experiment: Experiment, vcfg: VerifyConfig) -> list[CheckResult]:
    """Λ₁ ⪰ Λ₂ implies Σ′₁ ⪰ Σ′₂ at every checked history."""
    original = experiment.controller(_middle_theta(vcfg))
    history = resting_history(vcfg.check_positions, HISTORY_DEPTHS[-1])
    ordered = True
    for lam in continuation_variants(vcfg, experiment.x_target):
        larger = mirror_for(original, lam.scaled(2.0)).action_covariance(history)
        smaller = mirror_for(original, lam).action_covariance(history)
        ordered = ordered and is_loewner_geq(larger, smaller)
    return [
        CheckResult(
            name="loewner_monotonicity",
            family="loewner_monotonicity",
            passed=bool(ordered),
            statistic=0.0 if ordered else 1.0,
            threshold=0.0,
        )
    ]


def run_checks(
    config: ExperimentConfig, experiment: Experiment, logger: logging.Logger
) -> list[CheckResult]:
    """Run every check family with its own sub-stream of the master seed."""
    vcfg = config.verify
    stream = RandomStream(config.seed).child(VERIFY_STREAM)

    families = [
        ("return equality", lambda: check_return_equality(experiment, vcfg, stream.child(0))),
        ("Markov sufficiency", lambda: check_markov_sufficiency(experiment, vcfg, stream.child(1))),
        ("mirror moments", lambda: check_mirror_moments(experiment, vcfg, stream.child(2))),
        ("recovery round trip", lambda: check_recovery_roundtrip(vcfg, stream.child(3))),
        ("composition", lambda: check_composition(experiment, vcfg, stream.child(4))),
        ("Loewner monotonicity", lambda: check_loewner_monotonicity(experiment, vcfg)),
    ]

    results: list[CheckResult] = []
    for title, run in families:
        checks = run()
        failed = [c for c in checks if not c.passed]
        logger.info(f"  {title}: {len(checks) - len(failed)}/{len(checks)} passed")
        for check in failed:
            logger.warning(
                f"    ✗ {check.name}: statistic {check.statistic:.4g} "
                f"(threshold {check.threshold:.4g})"
            )
        results += checks
    return results


def verify_command(config: ExperimentConfig, logger: logging.Logger) -> CommandResult:
    """Run the identity suite and write verify_report.json.

    Args:
        config: Experiment configuration
        logger: Logger instance

    Returns:
        Report path; ``passed`` is False if any check failed
    """
    logger.info("=== Verify: mirror-policy identities ===")
    logger.info(
        f"n={config.verify.n_rollouts} rollouts per side, "
        f"m={config.verify.mixture_samples} mixture samples"
    )
    experiment = Experiment.from_config(config)
    checks = run_checks(config, experiment, logger)
    n_failed = sum(not c.passed for c in checks)

    output_path = config.output_path / "verify_report.json"
    write_json(
        output_path,
        result_header(config, "verify"),
        {
            "passed": n_failed == 0,
            "n_checks": len(checks),
            "n_failed": n_failed,
            "truncation_bias_bound": truncation_bias_bound(experiment.mdp),
            "checks": [c.as_dict() for c in checks],
        },
    )
    logger.info(f"  ✓ {output_path.name} ({len(checks) - n_failed}/{len(checks)} checks passed)")

    return CommandResult(
        outputs={"verify_report": output_path},
        passed=n_failed == 0,
        summary={"n_checks": len(checks), "n_failed": n_failed},
    )
