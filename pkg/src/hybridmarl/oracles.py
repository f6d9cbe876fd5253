"""Independent reference computations used by the test suite and ``selftest``.

Each oracle recomputes a quantity by a route that does not share code with
the engine: central finite differences instead of the tape, numerical
quadrature instead of Monte Carlo, scalar loops instead of vectorized
physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import autodiff as ad
from .algos import ddpg, sac
from .algos.common import N_DISCRETE, one_hot
from .nn import hybrid_entropy, hybrid_head, init_mlp, mlp_forward, squashed_log_density

# --------------------------------------------------------------- gradients


def central_difference(f, arrays, eps: float = 1e-5) -> list[np.ndarray]:
    """Gradient of scalar ``f()`` w.r.t. every entry of ``arrays``, perturbed in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + eps
            hi = f()
            flat[k] = keep - eps
            lo = f()
            flat[k] = keep
            gflat[k] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def relative_error(analytic, numeric) -> float:
    """``|a - n| / max(|a| + |n|, 1e-8)`` over the concatenated gradient vectors.

    The floor sits above central-difference roundoff (about ``1e-16 * |f| / h``),
    so a gradient that is exactly zero is not scored against roundoff noise.
    """
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-8))


def tape_gradient(build, nets) -> list[np.ndarray]:
    """Analytic gradient of ``build(*nets)`` w.r.t. every array of ``nets``."""
    tape = ad.Tape()
    bound = [n.bind(tape) for n in nets]
    grad_map = ad.backward(tape, build(*bound))
    return [g for b in bound for g in ad.grads_for(grad_map, b.arrays())]


def check_gradient(build, nets, eps: float = 1e-5) -> float:
    analytic = tape_gradient(build, nets)
    arrays = [a for n in nets for a in n.arrays()]
    numeric = central_difference(lambda: float(ad.value_of(build(*nets))), arrays, eps)
    return relative_error(analytic, numeric)


@dataclass
class _Draw:
    obs_dims: list
    hidden: tuple
    batch: int


def _random_draw(rng) -> _Draw:
    n_agents = int(rng.integers(1, 4))
    return _Draw(
        obs_dims=[int(d) for d in rng.integers(2, 5, size=n_agents)],
        hidden=(int(rng.integers(2, 6)),),
        batch=int(rng.integers(2, 5)),
    )


def _sac_case(rng, loss: str, mode: str):
    d = _random_draw(rng)
    i = int(rng.integers(len(d.obs_dims)))
    cfg = sac.SacConfig(mode=mode, hidden=d.hidden, alpha_d=float(rng.uniform(0, 1)), alpha_c=float(rng.uniform(0, 1)))
    agent = sac.SacAgent(i, d.obs_dims, cfg, rng)
    obs = [rng.standard_normal((d.batch, k)) for k in d.obs_dims]
    discrete = rng.integers(N_DISCRETE, size=(d.batch, len(d.obs_dims)))
    params = rng.random((d.batch, len(d.obs_dims), N_DISCRETE))
    x = agent.critic_input(obs, discrete, params)
    if loss == "critic":
        y = rng.standard_normal(d.batch)

        def build(c1, c2):
            return sac.critic_loss(c1, c2, x, discrete[:, i], y)[0]

        return build, [agent.critic1, agent.critic2]
    xi = rng.standard_normal((d.batch, N_DISCRETE))

    def build(actor):
        return sac.actor_loss(actor, agent.critic1, agent.critic2, obs[i], x, agent.action_column(), xi, cfg.alpha_d, cfg.alpha_c)

    return build, [agent.actor]


def _ddpg_case(rng, loss: str, mode: str):
    d = _random_draw(rng)
    i = int(rng.integers(len(d.obs_dims)))
    agent = ddpg.DdpgAgent(i, d.obs_dims, ddpg.DdpgConfig(mode=mode, hidden=d.hidden), rng)
    obs = [rng.standard_normal((d.batch, k)) for k in d.obs_dims]
    discrete = rng.integers(N_DISCRETE, size=(d.batch, len(d.obs_dims)))
    params = rng.random((d.batch, len(d.obs_dims), N_DISCRETE))
    x = agent.critic_input(obs, discrete, params)
    if loss == "critic":
        y = rng.standard_normal(d.batch)
        return (lambda c: ddpg.critic_loss(c, x, y)), [agent.critic]
    return (lambda a: ddpg.actor_loss(a, agent.critic, obs[i], x, agent.action_columns())), [agent.actor]


def _log_prob_case(rng):
    """Hybrid log-likelihood of fixed actions as a function of the policy trunk."""
    b = int(rng.integers(2, 5))
    obs_dim = int(rng.integers(2, 5))
    net = init_mlp([obs_dim, int(rng.integers(2, 6)), 3 * N_DISCRETE], rng)
    obs = rng.standard_normal((b, obs_dim))
    sel = one_hot(rng.integers(N_DISCRETE, size=b))
    u = np.arctanh(rng.uniform(-0.95, 0.95, size=(b, N_DISCRETE)))

    def build(actor):
        pol = hybrid_head(mlp_forward(actor, obs), N_DISCRETE)
        logp_d = ad.log(ad.softmax(pol.discrete.logits))
        logp_c = squashed_log_density(pol.continuous.mu, pol.continuous.log_sigma, u)
        return ad.mean(ad.sum((logp_d + logp_c) * sel, axis=1))

    return build, [net]


def _gradient_cases() -> dict:
    """One case per (algorithm, loss) plus the bare hybrid log-likelihood."""
    cases = {"hybrid_log_prob": _log_prob_case}
    for family, make in (("hsac", _sac_case), ("hddpg", _ddpg_case)):
        for mode, prefix in (("decentralized", ""), ("centralized", "ma")):
            for loss in ("critic", "actor"):
                cases[f"{prefix}{family}_{loss}"] = lambda rng, m=make, l=loss, md=mode: m(rng, l, md)
    return cases


GRADIENT_CASES = _gradient_cases()


def gradient_suite(draws: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst relative error per loss over ``draws`` random networks and batches."""
    out = {}
    for k, (name, make) in enumerate(GRADIENT_CASES.items()):
        rng = np.random.default_rng([seed, k])
        worst = 0.0
        for _ in range(draws):
            build, nets = make(rng)
            worst = max(worst, check_gradient(build, nets))
        out[name] = worst
    return out


# ----------------------------------------------------------------- entropy


def squashed_gaussian_entropy(mu: float, sigma: float) -> float:
    """Differential entropy of ``tanh(u)``, ``u ~ N(mu, sigma)``, by adaptive quadrature.

    The Jacobian term carries the same ``1e-6`` stabilizer as the sampler so
    both estimate the same quantity.
    """

    def integrand(u):
        pdf = math.exp(-0.5 * ((u - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
        log_pdf = -0.5 * ((u - mu) / sigma) ** 2 - math.log(sigma) - 0.5 * math.log(2.0 * math.pi)
        jac = math.log(1.0 - math.tanh(u) ** 2 + 1e-6)
        return -pdf * (log_pdf - jac)

    lo, hi = mu - 12.0 * sigma, mu + 12.0 * sigma
    val, _ = integrate.quad(integrand, lo, hi, points=[mu], limit=200, epsabs=1e-11, epsrel=1e-11)
    return val


def hybrid_entropy_reference(logits, mu, log_sigma, alpha_d: float, alpha_c: float) -> float:
    """Exact discrete entropy plus probability-weighted branch entropies for one row."""
    logits = np.asarray(logits, dtype=np.float64)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    h_d = -sum(pk * math.log(pk) for pk in p if pk > 0)
    h_c = sum(pk * squashed_gaussian_entropy(m, math.exp(s)) for pk, m, s in zip(p, mu, log_sigma))
    return alpha_d * h_d + alpha_c * h_c


# -------------------------------------------------------------------- adam


def adam_reference(x0: float, grad, steps: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> list[float]:
    """Scalar Adam trace ``[x_1, ..., x_steps]`` written from the textbook recursion."""
    x, m, v = float(x0), 0.0, 0.0
    trace = []
    for t in range(1, steps + 1):
        g = grad(x)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        x = x - lr * m_hat / (math.sqrt(v_hat) + eps)
        trace.append(x)
    return trace


# ----------------------------------------------------------------- physics


def two_body_trajectory(p1, p2, v1, v2, steps: int, radius=0.05, dt=0.1, damping=0.25, mass=1.0, k=100.0, margin=1e-3, max_speed=1.3, arena=1.5):
    """Two free agents under soft contact only, integrated with scalar arithmetic.

    Returns a list of ``(x1, y1, x2, y2)`` after each step.
    """
    x1, y1 = map(float, p1)
    x2, y2 = map(float, p2)
    a1, b1 = map(float, v1)
    a2, b2 = map(float, v2)
    out = []
    for _ in range(steps):
        dx, dy = x1 - x2, y1 - y2
        d = math.sqrt(dx * dx + dy * dy)
        fx = fy = 0.0
        if d > 0.0:
            z = -(d - 2.0 * radius) / margin
            soft = (z + math.log1p(math.exp(-z))) if z > 0 else math.log1p(math.exp(z))
            mag = k * margin * soft / d
            fx, fy = mag * dx, mag * dy
        state = []
        for (px, py, vx, vy, sx, sy) in ((x1, y1, a1, b1, fx, fy), (x2, y2, a2, b2, -fx, -fy)):
            vx = (1.0 - damping) * vx + sx * dt / mass
            vy = (1.0 - damping) * vy + sy * dt / mass
            sp = math.sqrt(vx * vx + vy * vy)
            if sp > max_speed:
                vx, vy = vx * max_speed / sp, vy * max_speed / sp
            px, py = px + vx * dt, py + vy * dt
            if abs(px) > arena:
                px, vx = math.copysign(arena, px), 0.0
            if abs(py) > arena:
                py, vy = math.copysign(arena, py), 0.0
            state.append((px, py, vx, vy))
        (x1, y1, a1, b1), (x2, y2, a2, b2) = state
        out.append((x1, y1, x2, y2))
    return out


# ------------------------------------------------------------- statistics


def chi_square_uniform(counts) -> float:
    """p-value of Pearson's test that ``counts`` come from a uniform categorical."""
    return float(stats.chisquare(np.asarray(counts, dtype=np.float64)).pvalue)


# ---------------------------------------------------------------- selftest


def run_selftest(report=print, draws: int = 10) -> bool:
    """Quick pass over every oracle family; returns True when all agree."""
    from . import env
    from .replay import ReplayBuffer, Transition

    results = []

    def record(name, ok, detail):
        results.append(ok)
        report(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    for name, err in gradient_suite(draws).items():
        record(f"gradient {name}", err <= 1e-4, f"max rel err {err:.2e}")

    state = ad.AdamState.for_params([np.array([1.0])], lr=0.1)
    x = np.array([1.0])
    trace = []
    for _ in range(10):
        ad.adam_step([x], [2.0 * x], state)
        trace.append(float(x[0]))
    ref = adam_reference(1.0, lambda v: 2.0 * v, 10, 0.1)
    dev = max(abs(a - b) for a, b in zip(trace, ref))
    record("adam trace", dev <= 1e-12, f"max dev {dev:.1e}")

    rng = np.random.default_rng(0)
    logits, mu, log_sigma = rng.standard_normal((3, 1, N_DISCRETE))
    policy = hybrid_head(np.concatenate([logits, mu, log_sigma], axis=1), N_DISCRETE)
    est, se = hybrid_entropy(policy, 1.0, 1.0, 10_000, rng, return_stderr=True)
    ref = hybrid_entropy_reference(logits[0], mu[0], log_sigma[0], 1.0, 1.0)
    z = abs(est[0] - ref) / se[0]
    record("hybrid entropy", z <= 3.0, f"{z:.2f} standard errors")

    cfg = env.WorldConfig()
    state0 = env.make_state("coop_nav", np.array([[0.0, 0.0], [0.06, 0.0], [0.8, 0.8], [-0.8, 0.8], [0.8, -0.8], [-0.8, -0.8]]), cfg=cfg)
    s = state0
    idle = [env.HybridAction(0, 0.0)] * 3
    got = []
    for _ in range(20):
        s, _ = env.step(s, idle, cfg)
        got.append((*s.pos[0], *s.pos[1]))
    ref = two_body_trajectory((0.0, 0.0), (0.06, 0.0), (0.0, 0.0), (0.0, 0.0), 20)
    dev = float(np.max(np.abs(np.array(got) - np.array(ref))))
    record("two-body contact", dev <= 1e-9, f"max dev {dev:.1e}")

    buf = ReplayBuffer(10)
    for k in range(10):
        buf.push(Transition([np.array([k])], [0], [np.zeros(4)], [0.0], [np.array([k])], [False]))
    rng = np.random.default_rng(1)
    idx = np.concatenate([buf.sample_indices(10, rng) for _ in range(10_000)])
    p = chi_square_uniform(np.bincount(idx, minlength=10))
    record("replay uniformity", p > 1e-3, f"p = {p:.3f}")

    return all(results)
