"""Phase 2: distill the privileged teacher into a recurrent student.

The student sees proprioception only. A GRU digests the stream into a short
summary vector and a velocity estimate, and the student actor maps
(proprioception, estimated velocity, summary) to actions. Training is
on-policy: the student drives the environment, the teacher labels every
visited state with its deterministic action and the simulator supplies the
true velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..env.ledger import derive_seed, make_fair_ledger
from ..env.observation import proprio_dim
from ..env.walker_env import WalkerEnv
from ..sim.model import WalkerModel
from .nets import GRU, MLP, Adam, tree_copy
from .policy import PolicyParams, proprio_scales, scaled_inputs

_DISTILL_TAG = 0x3317
_STUDENT_INIT_TAG = 0x5503
VEL_DIM = 2


@dataclass
class StudentParams:
    """Recurrent history encoder plus student actor weights."""

    task: str
    num_actions: int
    params: dict               # keys: gru, y_head {w, b}, v_head {w, b}, actor
    gru_hidden: int
    summary_dim: int
    hidden_sizes: tuple
    dtype: str = "float32"
    morphology: tuple | None = None
    # override for reduced test students; None follows the task layout
    proprio_override: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def in_dim(self) -> int:
        return self.proprio_override if self.proprio_override is not None \
            else proprio_dim(self.task)

    def nets(self):
        dt = np.dtype(self.dtype)
        d_p = self.in_dim
        gru = GRU(d_p, self.gru_hidden, dtype=dt)
        actor = MLP((d_p + VEL_DIM + self.summary_dim, *self.hidden_sizes,
                     self.num_actions), dtype=dt, final_scale=0.01)
        return gru, actor

    def copy(self) -> "StudentParams":
        return StudentParams(self.task, self.num_actions, tree_copy(self.params),
                             self.gru_hidden, self.summary_dim, self.hidden_sizes,
                             self.dtype, self.morphology, self.proprio_override,
                             dict(self.extra))


def init_student(task: str, hyper, rng, num_actions: int = 4, morphology=None,
                 proprio_override=None) -> StudentParams:
    sp = StudentParams(task=task, num_actions=num_actions, params={},
                       gru_hidden=hyper.gru_hidden, summary_dim=hyper.summary_dim,
                       hidden_sizes=tuple(hyper.hidden_sizes), dtype=hyper.dtype,
                       morphology=morphology, proprio_override=proprio_override)
    gru, actor = sp.nets()
    dt = np.dtype(hyper.dtype)
    h = hyper.gru_hidden
    lim_y = np.sqrt(6.0 / (h + hyper.summary_dim))
    lim_v = np.sqrt(6.0 / (h + VEL_DIM))
    sp.params = {
        "gru": gru.init(rng),
        "y_head": {"w": rng.uniform(-lim_y, lim_y, (h, hyper.summary_dim)).astype(dt),
                   "b": np.zeros(hyper.summary_dim, dtype=dt)},
        "v_head": {"w": rng.uniform(-lim_v, lim_v, (h, VEL_DIM)).astype(dt),
                   "b": np.zeros(VEL_DIM, dtype=dt)},
        "actor": actor.init(rng),
    }
    return sp


def student_cell(sp: StudentParams, gru: GRU, actor: MLP, proprio_scaled, h):
    """One student step: hidden update, heads, action mean; returns caches."""
    h_new, c_gru = gru.step(sp.params["gru"], proprio_scaled, h)
    y = h_new @ sp.params["y_head"]["w"] + sp.params["y_head"]["b"]
    vhat = h_new @ sp.params["v_head"]["w"] + sp.params["v_head"]["b"]
    x = np.concatenate([proprio_scaled.astype(h_new.dtype), vhat, y], axis=1)
    action, c_act = actor.forward(sp.params["actor"], x)
    return action, h_new, y, vhat, (c_gru, c_act)


def gru_encode_history(sp: StudentParams, proprio_stream):
    """Summary y_t and velocity estimate v_hat_t for a contiguous episode.

    proprio_stream: (T, d) or (T, n, d) raw proprioception; the hidden state
    starts at zero, matching an episode boundary.
    """
    stream = np.asarray(proprio_stream, dtype=np.float64)
    squeeze = stream.ndim == 2
    if squeeze:
        stream = stream[:, None, :]
    scales = proprio_scales(sp.task) if sp.proprio_override is None else 1.0
    gru, _ = sp.nets()
    n = stream.shape[1]
    h = np.zeros((n, sp.gru_hidden), dtype=np.dtype(sp.dtype))
    ys, vs = [], []
    for t in range(stream.shape[0]):
        h, _ = gru.step(sp.params["gru"], stream[t] * scales, h)
        ys.append(h @ sp.params["y_head"]["w"] + sp.params["y_head"]["b"])
        vs.append(h @ sp.params["v_head"]["w"] + sp.params["v_head"]["b"])
    y = np.stack(ys)
    v = np.stack(vs)
    if squeeze:
        return y[:, 0], v[:, 0]
    return y, v


def teacher_action(teacher: PolicyParams, obs):
    enc, actor, _ = teacher.nets()
    ov, priv = scaled_inputs(teacher, obs)
    z, _ = enc.forward(teacher.params["enc"], priv)
    mean, _ = actor.forward(teacher.params["actor"],
                            np.concatenate([ov.astype(z.dtype), z], axis=1))
    return mean.astype(np.float64)


def distill_loss_and_grads(sp: StudentParams, proprio_scaled, targets_a, targets_v,
                           dones, h0, velocity_weight: float):
    """Window loss and gradients with truncated backprop through time.

    proprio_scaled: (T, n, d) inputs as fed to the GRU; dones[t] marks envs
    whose hidden state was zeroed after step t, which also cuts the gradient
    path. The hidden state entering the window (h0) is treated as constant.
    Loss: mean squared action error + velocity_weight * mean squared velocity
    error. Returns (action_loss, velocity_loss, grads).
    """
    gru, actor = sp.nets()
    dt = np.dtype(sp.dtype)
    steps, n = proprio_scaled.shape[:2]
    h = np.asarray(h0, dtype=dt)
    caches, a_out, v_out = [], [], []
    for t in range(steps):
        action, h, y, vhat, cc = student_cell(sp, gru, actor,
                                              proprio_scaled[t].astype(dt), h)
        caches.append(cc)
        a_out.append(action.astype(np.float64))
        v_out.append(vhat.astype(np.float64))
        if dones[t].any():
            h = h * (~dones[t][:, None]).astype(dt)
    a_s = np.stack(a_out)
    v_s = np.stack(v_out)
    action_loss = float(((a_s - targets_a) ** 2).mean())
    velocity_loss = float(((v_s - targets_v) ** 2).mean())

    grads = {"gru": gru.zero_grads(),
             "y_head": {"w": np.zeros_like(sp.params["y_head"]["w"]),
                        "b": np.zeros_like(sp.params["y_head"]["b"])},
             "v_head": {"w": np.zeros_like(sp.params["v_head"]["w"]),
                        "b": np.zeros_like(sp.params["v_head"]["b"])},
             "actor": None}
    g_actor_acc = None
    d_p = proprio_scaled.shape[2]
    dh_next = np.zeros_like(h)
    for t in range(steps - 1, -1, -1):
        c_gru, c_act = caches[t]
        da = (2.0 * (a_s[t] - targets_a[t]) / a_s.size).astype(dt)
        g_act, dx = actor.backward(sp.params["actor"], c_act, da)
        if g_actor_acc is None:
            g_actor_acc = g_act
        else:
            for k in g_act:
                g_actor_acc[k] += g_act[k]
        dvhat = dx[:, d_p:d_p + VEL_DIM] + \
            (2.0 * velocity_weight * (v_s[t] - targets_v[t]) / v_s.size).astype(dt)
        dy = dx[:, d_p + VEL_DIM:]
        h_state = _hidden_after(c_gru)
        grads["y_head"]["w"] += h_state.T @ dy
        grads["y_head"]["b"] += dy.sum(axis=0)
        grads["v_head"]["w"] += h_state.T @ dvhat
        grads["v_head"]["b"] += dvhat.sum(axis=0)
        dh = dh_next + dy @ sp.params["y_head"]["w"].T + dvhat @ sp.params["v_head"]["w"].T
        _, dh_prev = gru.backward_step(sp.params["gru"], c_gru, dh, grads["gru"])
        if t > 0:
            dh_next = dh_prev * (~dones[t - 1][:, None]).astype(dt)
    grads["actor"] = g_actor_acc
    return action_loss, velocity_loss, grads


def _hidden_after(c_gru):
    """Recompute h' from a GRU cache: (1 - z) * n + z * h."""
    _, h, _, z, n, _ = c_gru
    return (1.0 - z) * n + z * h


def distill_student(teacher: PolicyParams, model: WalkerModel, cfg: RunConfig,
                    updates: int | None = None) -> tuple[StudentParams, list]:
    """On-policy imitation of the teacher; returns (student, loss trace).

    Each update rolls one window with the current student, labels it with
    teacher actions and true velocities, and applies one gradient step on
    action regression plus velocity estimation. updates = 0 returns the
    freshly initialized student and an empty trace.
    """
    hyper = cfg.train
    if updates is None:
        updates = hyper.distill_updates
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=[cfg.master_seed, _STUDENT_INIT_TAG]))
    sp = init_student(cfg.task, hyper, rng, teacher.num_actions,
                      morphology=model.lengths.as_tuple())
    trace = []
    if updates == 0:
        return sp, trace

    env = WalkerEnv(model, cfg, num_envs=hyper.num_envs)
    ledger = make_fair_ledger(0, derive_seed(cfg.master_seed, _DISTILL_TAG))
    obs = env.reset(ledger)
    gru, actor = sp.nets()
    dt = np.dtype(sp.dtype)
    n = env.num_envs
    steps = hyper.steps_per_iteration
    scales = proprio_scales(sp.task)
    optimizer = Adam(sp.params, hyper.distill_learning_rate,
                     max_grad_norm=hyper.max_grad_norm)
    h = np.zeros((n, sp.gru_hidden), dtype=dt)

    for upd in range(updates):
        proprio = np.zeros((steps, n, proprio_dim(sp.task)))
        targets_a = np.zeros((steps, n, sp.num_actions))
        targets_v = np.zeros((steps, n, VEL_DIM))
        dones = np.zeros((steps, n), dtype=bool)
        h0 = h.copy()
        for t in range(steps):
            proprio[t] = obs.proprio * scales
            targets_a[t] = teacher_action(teacher, obs)
            targets_v[t] = obs.velocity
            action, h, _, _, _ = student_cell(sp, gru, actor,
                                              proprio[t].astype(dt), h)
            obs, _, done, _ = env.step(action.astype(np.float64))
            dones[t] = done
            if done.any():
                h = h * (~done[:, None]).astype(dt)
        # several passes per window: supervised targets tolerate reuse
        first = None
        for _ in range(hyper.distill_epochs):
            action_loss, vel_loss, grads = distill_loss_and_grads(
                sp, proprio, targets_a, targets_v, dones, h0,
                hyper.distill_velocity_weight)
            optimizer.step(sp.params, grads)
            if first is None:
                first = (action_loss, vel_loss)
        trace.append({"update": upd + 1, "action_loss": first[0],
                      "velocity_loss": first[1]})
    return sp, trace


def student_vs_teacher(sp: StudentParams, teacher: PolicyParams, model: WalkerModel,
                       cfg: RunConfig, seed: int, steps: int = 500, num_envs: int = 8):
    """Held-out comparison on student-driven rollouts.

    Returns RMS action error (rad) against the teacher's deterministic action
    and RMS velocity-estimate error (m/s) against the simulator.
    """
    env = WalkerEnv(model, cfg, num_envs=num_envs)
    ledger = make_fair_ledger(0, derive_seed(seed, 0xE7A1))
    obs = env.reset(ledger)
    gru, actor = sp.nets()
    dt = np.dtype(sp.dtype)
    scales = proprio_scales(sp.task)
    h = np.zeros((num_envs, sp.gru_hidden), dtype=dt)
    sq_a, sq_v, count_a, count_v = 0.0, 0.0, 0, 0
    for _ in range(steps):
        t_a = teacher_action(teacher, obs)
        action, h, y, vhat, _ = student_cell(sp, gru, actor,
                                             (obs.proprio * scales).astype(dt), h)
        sq_a += float(((action.astype(np.float64) - t_a) ** 2).sum())
        count_a += t_a.size
        sq_v += float(((vhat.astype(np.float64) - obs.velocity) ** 2).sum())
        count_v += obs.velocity.size
        obs, _, done, _ = env.step(action.astype(np.float64))
        if done.any():
            h = h * (~done[:, None]).astype(dt)
    return {"action_rms": np.sqrt(sq_a / count_a), "velocity_rms": np.sqrt(sq_v / count_v)}


def evaluate_student(sp: StudentParams, model: WalkerModel, cfg: RunConfig,
                     ledger, episodes: int = 1, num_envs: int = 1):
    """Deterministic student rollouts; one record per episode (same shape as
    the teacher evaluation records)."""
    env = WalkerEnv(model, cfg, num_envs=num_envs)
    gru, actor = sp.nets()
    dt = np.dtype(sp.dtype)
    scales = proprio_scales(sp.task)
    records = []
    for ep in range(episodes):
        ep_ledger = make_fair_ledger(ledger.generation, derive_seed(ledger.master_seed, ep))
        obs = env.reset(ep_ledger)
        h = np.zeros((num_envs, sp.gru_hidden), dtype=dt)
        ret = np.zeros(num_envs)
        vx_sum = np.zeros(num_envs)
        vx_max = np.full(num_envs, -np.inf)
        power_sum = np.zeros(num_envs)
        alive_steps = np.zeros(num_envs)
        term_sums = {}
        alive = np.ones(num_envs, dtype=bool)
        for _ in range(cfg.episode_steps):
            action, h, _, _, _ = student_cell(sp, gru, actor,
                                              (obs.proprio * scales).astype(dt), h)
            obs, reward, done, info = env.step(action.astype(np.float64))
            ret += reward * alive
            vx_sum += info["vx"] * alive
            vx_max = np.maximum(vx_max, np.where(alive, info["vx"], -np.inf))
            power_sum += info["power"] * alive
            for name, vals in info["breakdown"].terms.items():
                term_sums.setdefault(name, np.zeros(num_envs))
                term_sums[name] += np.asarray(vals) * alive
            alive_steps += alive
            alive &= ~done
            if done.any():
                h = h * (~done[:, None]).astype(dt)
            if not alive.any():
                break
        denom = np.maximum(alive_steps, 1.0)
        records.append({
            "episode": ep, "steps": float(alive_steps.mean()), "return": float(ret.mean()),
            "mean_velocity": float((vx_sum / denom).mean()),
            "max_velocity": float(vx_max.max()),
            "mean_power": float((power_sum / denom).mean()),
            "terms": {k: float(v.mean()) for k, v in term_sums.items()},
        })
    return records
