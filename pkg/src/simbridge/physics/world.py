"""Fixed-step rigid-body world with sequential-impulse contacts.

Bodies joined without a joint are welded into one rigid group.  A hinge
joint makes its child a separate rigid body tied to the parent by a
five-row (point + two angular) impulse constraint.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, SimulationDiverged, SpecError
from ..geometry import compose, invert, quat_conj, quat_mul, quat_normalize, quat_to_mat
from ..mesh.hull import convex_hull
from ..spec.model import PhysicsSpec
from .collision import Posed, collide
from .collision import cross as _cross
from .state import BodyState, Contact, SensorReading, frozen


@dataclass
class SolverConfig:
    iterations: int = 8
    baumgarte: float = 0.2
    restitution_threshold: float = 0.5  # m/s approach speed below which contacts are inelastic
    slop: float = 0.0
    max_contacts_per_pair: int = 8
    gyroscopic: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("solver needs at least one iteration")
        if not 0.0 <= self.baumgarte <= 1.0:
            raise InputError("baumgarte factor must be in [0, 1]")


class _Rigid:
    def __init__(self, name, dynamic):
        self.name = name
        self.dynamic = dynamic
        self.bodies = []
        self.x = np.zeros(3)
        self.q = np.array([1.0, 0.0, 0.0, 0.0])
        self.m_inv = 0.0
        self.mass = 0.0
        self.I_body = np.zeros((3, 3))
        self.I_body_inv = np.zeros((3, 3))


class _GeomRec:
    def __init__(self, index, geom, body, rigid, pos, rot):
        self.index = index
        self.geom = geom
        self.body = body
        self.rigid = rigid
        self.pos = pos
        self.rot = rot
        self.local_verts = None
        self.planes = None
        self.posed = None  # cached for static geoms


class _Hinge:
    pass


def _mat_tuple(m):
    return np.array(m, dtype=float).reshape(3, 3)


def _tangents(n):
    a = np.abs(n)
    axis = np.zeros(3)
    axis[int(np.argmin(a))] = 1.0
    t1 = _cross(n, axis)
    t1 /= math.sqrt(float(t1 @ t1))
    return t1, _cross(n, t1)


class World:
    """Simulation state built from a validated :class:`PhysicsSpec`."""

    def __init__(self, spec: PhysicsSpec, dt: float = 1e-3, config: SolverConfig | None = None):
        if not dt > 0:
            raise InputError(f"dt must be > 0, got {dt}")
        spec.validate()
        self.spec = spec
        self.dt = float(dt)
        self.config = config or SolverConfig()
        self.gravity = np.array(spec.gravity, dtype=float)
        self.step_count = 0
        self._queue = []
        self._queue_lock = threading.Lock()
        self._ctrl = {a.id: 0.0 for a in spec.actuators}
        self._build(spec)
        self.last_contacts = []
        self._last_readings = None

    @property
    def time(self) -> float:
        return self.step_count * self.dt

    # -- construction -------------------------------------------------------

    def _build(self, spec):
        bodies = {b.id: b for b in spec.bodies}
        self._body_order = {b.id: i for i, b in enumerate(spec.bodies)}
        world_pose = {}

        def pose(bid):
            if bid not in world_pose:
                b = bodies[bid]
                if b.parent is None:
                    world_pose[bid] = (np.array(b.pos, dtype=float), quat_normalize(b.quat))
                else:
                    pp, pq = pose(b.parent)
                    world_pose[bid] = compose(pp, pq, b.pos, b.quat)
            return world_pose[bid]

        self.rigids = []
        self._rigid_of = {}
        hinge_specs = []
        for b in spec.bodies:
            pose(b.id)
        ordered = sorted(spec.bodies, key=lambda b: self._depth(b, bodies))
        for b in ordered:
            hinges = [j for j in b.joints if j.type == "hinge"]
            if len(hinges) > 1:
                raise SpecError(f"body {b.id!r}: at most one hinge joint per body is supported")
            if b.parent is None:
                r = _Rigid(b.id, b.free)
                self.rigids.append(r)
            elif hinges and self.rigids[self._rigid_of[b.parent]].dynamic:
                r = _Rigid(b.id, True)
                self.rigids.append(r)
                hinge_specs.append((b, hinges[0]))
            else:
                r = self.rigids[self._rigid_of[b.parent]]
            r.bodies.append(b.id)
            self._rigid_of[b.id] = self.rigids.index(r)
        # mass properties per rigid, in the frame of its first body
        self._local = {}
        for r in self.rigids:
            rp, rq = world_pose[r.bodies[0]]
            ip, iq = invert(rp, rq)
            total, first, inertia_parts = 0.0, np.zeros(3), []
            rel = {}
            for bid in r.bodies:
                bp, bq = compose(ip, iq, *world_pose[bid])
                rel[bid] = (bp, bq)
                b = bodies[bid]
                if b.mass > 0:
                    rot = quat_to_mat(bq)
                    com = bp + rot @ np.array(b.com, dtype=float)
                    inertia_parts.append((b.mass, com, rot @ _mat_tuple(b.inertia) @ rot.T))
                    total += b.mass
                    first += b.mass * com
            if r.dynamic:
                if not total > 0:
                    raise SpecError(f"dynamic body {r.name!r} has no mass")
                com = first / total
                inertia = np.zeros((3, 3))
                for m, c, i in inertia_parts:
                    d = c - com
                    inertia += i + m * (float(d @ d) * np.eye(3) - np.outer(d, d))
                inertia = 0.5 * (inertia + inertia.T)
                if np.linalg.eigvalsh(inertia).min() <= 0:
                    raise SpecError(f"dynamic body {r.name!r} has a singular inertia tensor")
                r.mass, r.m_inv = total, 1.0 / total
                r.I_body, r.I_body_inv = inertia, np.linalg.inv(inertia)
            else:
                com = np.zeros(3)
            r.x = rp + quat_to_mat(rq) @ com
            r.q = rq.copy()
            for bid in r.bodies:
                bp, bq = rel[bid]
                self._local[bid] = (bp - com, bq)
        n = len(self.rigids)
        self.V = np.zeros((n, 6))
        self._dynamic = np.array([r.dynamic for r in self.rigids], dtype=bool)
        # geoms
        self.geoms = []
        for b in spec.bodies:
            lp, lq = self._local[b.id]
            for g in b.geoms:
                gp, gq = compose(lp, lq, g.pos, g.quat)
                rec = _GeomRec(len(self.geoms), g, b.id, self._rigid_of[b.id], gp, quat_to_mat(gq))
                if g.shape == "mesh":
                    hull = convex_hull(spec.meshes[g.asset].vertices)
                    rec.local_verts = hull.vertices
                    rec.planes = hull.planes
                self.geoms.append(rec)
        self._refresh_rotations()
        for rec in self.geoms:
            if not self.rigids[rec.rigid].dynamic:
                rec.posed = self._pose_geom(rec)
        # sites
        self.sites = {}
        for s in spec.sites:
            lp, lq = self._local[s.body]
            sp, sq = compose(lp, lq, s.pos, s.quat)
            self.sites[s.id] = (s.body, self._rigid_of[s.body], sp, sq, quat_to_mat(sq))
        # hinges
        self.hinges = {}
        for b, j in hinge_specs:
            h = _Hinge()
            h.name = j.name
            h.child = self._rigid_of[b.id]
            h.parent = self._rigid_of[b.parent]
            lp, lq = self._local[b.id]
            lrot = quat_to_mat(lq)
            h.anchor_c = lp + lrot @ np.array(j.pos, dtype=float)
            h.axis_c = lrot @ np.array(j.axis, dtype=float)
            rc, rp = self.rigids[h.child], self.rigids[h.parent]
            world_anchor = rc.x + self._R[h.child] @ h.anchor_c
            world_axis = self._R[h.child] @ h.axis_c
            h.anchor_p = self._R[h.parent].T @ (world_anchor - rp.x)
            h.axis_p = self._R[h.parent].T @ world_axis
            h.q_rel0 = quat_mul(quat_conj(rp.q), rc.q)
            self.hinges[j.name] = h
        # contact filtering: same rigid, static-static, hinge-connected rigids
        self._excluded = {(min(h.child, h.parent), max(h.child, h.parent)) for h in self.hinges.values()}
        self._actuators = list(spec.actuators)
        self._sensors = list(spec.sensors)
        self._imu_prev = {}
        self._imu_accel = {}
        for s in self._sensors:
            if s.kind == "imu":
                self._imu_prev[s.id] = self._site_velocity(s.site)
                body, ri, sp, sq, srot = self.sites[s.site]
                rot = self._R[ri] @ srot
                self._imu_accel[s.id] = rot.T @ (-self.gravity)
        self._site_force = {}

    @staticmethod
    def _depth(b, bodies):
        d = 0
        while b.parent is not None:
            b = bodies[b.parent]
            d += 1
        return d

    def _refresh_rotations(self):
        self._R = [quat_to_mat(r.q) for r in self.rigids]
        self._Iw_inv = [R @ r.I_body_inv @ R.T for R, r in zip(self._R, self.rigids)]

    def _pose_geom(self, rec):
        r = self.rigids[rec.rigid]
        R = self._R[rec.rigid]
        pos = r.x + R @ rec.pos
        rot = R @ rec.rot
        g = rec.geom
        if g.shape == "sphere":
            return Posed("sphere", pos, rot, radius=float(g.size[0]))
        if g.shape == "box":
            return Posed("box", pos, rot, half=np.array(g.size, dtype=float))
        if g.shape == "mesh":
            return Posed("mesh", pos, rot, local_verts=rec.local_verts, planes=rec.planes)
        return Posed("hfield", pos, rot, hfield=self.spec.hfields[g.asset])

    # -- public API ---------------------------------------------------------

    def _rigid_for(self, body_id):
        if body_id not in self._rigid_of:
            raise InputError(f"unknown body {body_id!r}")
        ri = self._rigid_of[body_id]
        if not self.rigids[ri].dynamic:
            raise InputError(f"body {body_id!r} is static and cannot receive forces")
        return ri

    def apply_external(self, body_id, force=(0.0, 0.0, 0.0), torque=(0.0, 0.0, 0.0)):
        """Queue a force (through the centre of mass) and torque for the next step only."""
        ri = self._rigid_for(body_id)
        f = np.array(force, dtype=float).reshape(3)
        t = np.array(torque, dtype=float).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise InputError("force and torque must be finite")
        with self._queue_lock:
            self._queue.append((ri, f, t))

    def set_control(self, actuator_id, value):
        if actuator_id not in self._ctrl:
            raise InputError(f"unknown actuator {actuator_id!r}")
        v = float(np.ravel(value)[0]) if np.ndim(value) else float(value)
        if not math.isfinite(v):
            raise InputError("actuator command must be finite")
        self._ctrl[actuator_id] = v

    def set_velocity(self, body_id, linear=(0.0, 0.0, 0.0), angular=(0.0, 0.0, 0.0)):
        ri = self._rigid_for(body_id)
        self.V[ri, :3] = linear
        self.V[ri, 3:] = angular
        for s in self._sensors:
            if s.kind == "imu":
                self._imu_prev[s.id] = self._site_velocity(s.site)

    def body_states(self):
        out = []
        for b in self.spec.bodies:
            ri = self._rigid_of[b.id]
            r, R = self.rigids[ri], self._R[ri]
            lp, lq = self._local[b.id]
            off = R @ lp
            w = self.V[ri, 3:]
            out.append(BodyState(
                b.id,
                frozen(r.x + off),
                frozen(quat_normalize(quat_mul(r.q, lq))),
                frozen(self.V[ri, :3] + _cross(w, off)),
                frozen(w),
            ))
        return out

    def body_state(self, body_id) -> BodyState:
        for s in self.body_states():
            if s.id == body_id:
                return s
        raise InputError(f"unknown body {body_id!r}")

    def state_vector(self) -> np.ndarray:
        """Concatenated rigid positions, orientations and velocities (for equality checks)."""
        return np.concatenate([np.concatenate([r.x, r.q]) for r in self.rigids] + [self.V.ravel()])

    def joint_angle(self, name) -> float:
        h = self.hinges[name]
        rel = quat_mul(quat_conj(self.rigids[h.parent].q), self.rigids[h.child].q)
        d = quat_mul(quat_conj(h.q_rel0), rel)
        axis = h.axis_p
        return 2.0 * math.atan2(float(d[1:] @ axis), float(d[0]))

    # -- stepping -----------------------------------------------------------

    def _site_velocity(self, site_id):
        body, ri, sp, sq, srot = self.sites[site_id]
        arm = self._R[ri] @ sp
        return self.V[ri, :3] + _cross(self.V[ri, 3:], arm)

    def _actuator_wrenches(self, F):
        for a in self._actuators:
            u = self._ctrl[a.id]
            if u == 0.0 and a.kind == "force":
                continue
            if a.target_type == "site":
                body, ri, sp, sq, srot = self.sites[a.target]
                if not self.rigids[ri].dynamic:
                    continue
                rot = self._R[ri] @ srot
                f = u * (rot @ np.array(a.gear[:3], dtype=float))
                t = u * (rot @ np.array(a.gear[3:], dtype=float))
                F[ri, :3] += f
                F[ri, 3:] += t + _cross(self._R[ri] @ sp, f)
                continue
            h = self.hinges.get(a.target)
            if h is None:
                continue  # welded joint: nothing to drive
            g = float(a.gear[0])
            if a.kind == "position":
                tau = g * a.kp * (u - g * self.joint_angle(a.target))
            else:
                tau = g * u
            axis = self._R[h.parent] @ h.axis_p
            F[h.child, 3:] += tau * axis
            F[h.parent, 3:] -= tau * axis

    def _detect(self):
        posed = [rec.posed if rec.posed is not None else self._pose_geom(rec) for rec in self.geoms]
        n = len(posed)
        if n < 2:
            return []
        lo = np.array([p.aabb[0] for p in posed])
        hi = np.array([p.aabb[1] for p in posed])
        order = np.argsort(lo[:, 0], kind="stable")
        pairs = []
        for oi, i in enumerate(order):
            gi = self.geoms[i]
            for j in order[oi + 1:]:
                if lo[j, 0] > hi[i, 0]:
                    break
                gj = self.geoms[j]
                ra, rb = gi.rigid, gj.rigid
                if ra == rb or not (self._dynamic[ra] or self._dynamic[rb]):
                    continue
                if (min(ra, rb), max(ra, rb)) in self._excluded:
                    continue
                if lo[j, 1] > hi[i, 1] or lo[i, 1] > hi[j, 1] or lo[j, 2] > hi[i, 2] or lo[i, 2] > hi[j, 2]:
                    continue
                a, b = (i, j) if i < j else (j, i)
                pairs.append(a * n + b)
        pairs.sort(key=lambda k: (self._body_order[self.geoms[k // n].body], self._body_order[self.geoms[k % n].body], k))
        contacts = []
        limit = self.config.max_contacts_per_pair
        for key in pairs:
            a, b = self.geoms[key // n], self.geoms[key % n]
            for point, normal, depth in collide(posed[a.index], posed[b.index])[:limit]:
                c = Contact(a.body, b.body, point, normal, max(float(depth), 0.0), geom_a=a.geom.name, geom_b=b.geom.name)
                c._ra, c._rb = a.rigid, b.rigid
                c._mu = math.sqrt(a.geom.friction * b.geom.friction)
                c._e = max(a.geom.restitution, b.geom.restitution)
                contacts.append(c)
        return contacts

    def _prepare_contact(self, c):
        ia, ib = c._ra, c._rb
        ra = c.point - self.rigids[ia].x
        rb = c.point - self.rigids[ib].x
        n = c.normal
        t1, t2 = _tangents(n)
        ma, mb = self.rigids[ia].m_inv, self.rigids[ib].m_inv
        Ia, Ib = self._Iw_inv[ia], self._Iw_inv[ib]

        def rows(d):
            ja = np.concatenate([-d, -_cross(ra, d)])
            jb = np.concatenate([d, _cross(rb, d)])
            mja = np.concatenate([ma * ja[:3], Ia @ ja[3:]])
            mjb = np.concatenate([mb * jb[:3], Ib @ jb[3:]])
            return ja, jb, mja, mjb

        c._n = rows(n)
        ta = [rows(t1), rows(t2)]
        c._Ta = np.array([r[0] for r in ta])
        c._Tb = np.array([r[1] for r in ta])
        c._MTa = np.array([r[2] for r in ta])
        c._MTb = np.array([r[3] for r in ta])
        ja, jb, mja, mjb = c._n
        kn = float(ja @ mja + jb @ mjb)
        c._kn_inv = 1.0 / kn if kn > 0 else 0.0
        kt = c._Ta @ c._MTa.T + c._Tb @ c._MTb.T
        det = kt[0, 0] * kt[1, 1] - kt[0, 1] * kt[1, 0]
        c._kt_inv = np.array([[kt[1, 1], -kt[0, 1]], [-kt[1, 0], kt[0, 0]]]) / det if det > 1e-300 else np.zeros((2, 2))
        c._tangents = (t1, t2)
        vn = float(ja @ self.V[ia] + jb @ self.V[ib])
        bias = self.config.baumgarte / self.dt * max(c.penetration - self.config.slop, 0.0)
        if -vn > self.config.restitution_threshold:
            bias = max(bias, -c._e * vn)
        c._bias = bias
        c._lam_t = np.zeros(2)

    def _prepare_hinge(self, h):
        pa, pc = self.rigids[h.parent], self.rigids[h.child]
        Rp, Rc = self._R[h.parent], self._R[h.child]
        ra = Rp @ h.anchor_p
        rb = Rc @ h.anchor_c
        err_p = (pc.x + rb) - (pa.x + ra)
        ap = Rp @ h.axis_p
        ac = Rc @ h.axis_c
        u1, u2 = _tangents(ap)
        Ja, Jb, C = [], [], []
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1.0
            Ja.append(np.concatenate([-e, -_cross(ra, e)]))
            Jb.append(np.concatenate([e, _cross(rb, e)]))
            C.append(err_p[k])
        ang = _cross(ap, ac)
        for u in (u1, u2):
            Ja.append(np.concatenate([np.zeros(3), -u]))
            Jb.append(np.concatenate([np.zeros(3), u]))
            C.append(float(u @ ang))
        Ja, Jb = np.array(Ja), np.array(Jb)
        Ma = np.hstack([Ja[:, :3] * pa.m_inv, Ja[:, 3:] @ self._Iw_inv[h.parent].T])
        Mb = np.hstack([Jb[:, :3] * pc.m_inv, Jb[:, 3:] @ self._Iw_inv[h.child].T])
        K = Ja @ Ma.T + Jb @ Mb.T
        h._Ja, h._Jb, h._Ma, h._Mb = Ja, Jb, Ma, Mb
        h._K_inv = np.linalg.pinv(K)
        h._bias = self.config.baumgarte / self.dt * np.array(C)

    def _solve(self, contacts):
        V = self.V
        for c in contacts:
            self._prepare_contact(c)
        hinges = list(self.hinges.values())
        for h in hinges:
            self._prepare_hinge(h)
        for _ in range(self.config.iterations):
            for h in hinges:
                jv = h._Ja @ V[h.parent] + h._Jb @ V[h.child]
                lam = -(h._K_inv @ (jv + h._bias))
                V[h.parent] += lam @ h._Ma
                V[h.child] += lam @ h._Mb
            for c in contacts:
                ia, ib = c._ra, c._rb
                ja, jb, mja, mjb = c._n
                vn = float(ja @ V[ia] + jb @ V[ib])
                new = max(c.normal_impulse + (c._bias - vn) * c._kn_inv, 0.0)
                d = new - c.normal_impulse
                c.normal_impulse = new
                if d != 0.0:
                    V[ia] += d * mja
                    V[ib] += d * mjb
                if c._mu > 0.0:
                    vt = c._Ta @ V[ia] + c._Tb @ V[ib]
                    lam = c._lam_t - c._kt_inv @ vt
                    cap = c._mu * c.normal_impulse
                    norm = math.sqrt(float(lam @ lam))
                    if norm > cap:
                        lam = lam * (cap / norm) if norm > 0 else lam
                    dt_ = lam - c._lam_t
                    c._lam_t = lam
                    V[ia] += dt_ @ c._MTa
                    V[ib] += dt_ @ c._MTb
        for c in contacts:
            c.tangent_impulse = c._lam_t.copy()

    def step(self):
        """Advance one fixed step; returns ``(contacts, readings)``."""
        dt = self.dt
        n = len(self.rigids)
        F = np.zeros((n, 6))
        with self._queue_lock:
            queue, self._queue = self._queue, []
        for ri, f, t in queue:
            F[ri, :3] += f
            F[ri, 3:] += t
        self._refresh_rotations()
        self._actuator_wrenches(F)
        V = self.V
        for i, r in enumerate(self.rigids):
            if not r.dynamic:
                continue
            V[i, :3] += dt * (self.gravity + F[i, :3] * r.m_inv)
            w = V[i, 3:]
            tau = F[i, 3:]
            if self.config.gyroscopic:
                R = self._R[i]
                Iw = R @ r.I_body @ R.T
                tau = tau - _cross(w, Iw @ w)
            V[i, 3:] += dt * (self._Iw_inv[i] @ tau)
        contacts = self._detect()
        self._solve(contacts)
        for i, r in enumerate(self.rigids):
            if not r.dynamic:
                continue
            r.x = r.x + dt * V[i, :3]
            w = V[i, 3:]
            dq = quat_mul(np.array([0.0, w[0], w[1], w[2]]), r.q)
            r.q = quat_normalize(r.q + 0.5 * dt * dq)
            if not (np.all(np.isfinite(r.x)) and np.all(np.isfinite(r.q)) and np.all(np.isfinite(V[i]))):
                raise SimulationDiverged(r.name)
        self._refresh_rotations()
        self.step_count += 1
        self.last_contacts = contacts
        self._update_sensors(contacts)
        return contacts, self.eval_sensors()

    # -- sensors ------------------------------------------------------------

    def _update_sensors(self, contacts):
        for s in self._sensors:
            if s.kind == "imu":
                v = self._site_velocity(s.site)
                body, ri, sp, sq, srot = self.sites[s.site]
                rot = self._R[ri] @ srot
                self._imu_accel[s.id] = rot.T @ ((v - self._imu_prev[s.id]) / self.dt - self.gravity)
                self._imu_prev[s.id] = v
        per_body = {}
        for c in contacts:
            t1, t2 = c._tangents
            imp = c.normal * c.normal_impulse + t1 * c.tangent_impulse[0] + t2 * c.tangent_impulse[1]
            per_body[c.body_b] = per_body.get(c.body_b, 0.0) + imp
            per_body[c.body_a] = per_body.get(c.body_a, 0.0) - imp
        self._site_force = per_body

    def eval_sensors(self):
        out = []
        t = self.time
        for s in self._sensors:
            body, ri, sp, sq, srot = self.sites[s.site]
            R = self._R[ri]
            rot = R @ srot
            if s.kind == "imu":
                vals = np.concatenate([self._imu_accel[s.id], rot.T @ self.V[ri, 3:]])
            elif s.kind == "force":
                imp = self._site_force.get(body, np.zeros(3))
                vals = rot.T @ (np.asarray(imp, dtype=float) / self.dt)
            else:
                r = self.rigids[ri]
                vals = np.concatenate([r.x + R @ sp, quat_normalize(quat_mul(r.q, sq))])
            out.append(SensorReading(s.id, s.kind, t, frozen(vals)))
        return out


def step(world: World):
    return world.step()


def apply_external(world: World, body_id, force, torque=(0.0, 0.0, 0.0)):
    world.apply_external(body_id, force, torque)


def eval_sensors(world: World):
    return world.eval_sensors()
