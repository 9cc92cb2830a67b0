"""Continuous-time CSMA event kernel.

A link that senses the channel idle (no conflicting link transmitting) waits
an Exp(z_l) backoff and then transmits for an Exp(1) duration.  Blocked
backoffs are discarded and redrawn when the channel clears, which is exact for
exponential timers; an optional freeze/resume mode keeps the residual instead.

On top of the channel dynamics the kernel runs the pieces that must be
interleaved event by event: fluid queues, integer-epoch arrivals and the
control tick (adaptive attempt rates, admission control), periodic global
unlocks, and the busy-tone protocol for distributed unlocking.

All state lives in flat numpy arrays so one ``@njit`` loop can process them.
Pending timers sit in a binary heap ordered by ``(time, link, kind)`` with
lazy deletion through per-link generation counters.  At equal timestamps heap
events come first, then trace arrivals, the control tick, and the unlock.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .arrivals import KIND_NONE, KIND_TRACE, slot_count
from .congestion import admit_log
from .errors import ConfigError
from .queues import fluid_step
from .rng import STREAM_CHANNEL, STREAM_PROTOCOL, exponential, make_streams, uniform

INF = np.inf

# link status
IDLE, BACKOFF, TRANSMIT = 0, 1, 2

# heap event kinds
EV_TXEND, EV_BACKOFF, EV_COUNTER, EV_TONE, EV_REJOIN = 0, 1, 2, 3, 4
KSHIFT = 8

# logged event codes
LOG_TX_START, LOG_TX_END, LOG_UNLOCK, LOG_BROADCAST, LOG_REJOIN = 0, 1, 2, 3, 4
LOG_NAMES = ("tx_start", "tx_end", "unlock", "broadcast", "rejoin")

# float rows of F
(F_TIMER, F_RESID, F_Z, F_Q, F_QT, F_QINT, F_PINT, F_ARR, F_SERVED, F_INFLOW,
 F_ACT, F_TXSTART, F_TLAST1, F_TLAST2, F_LAM, F_LASTB) = range(16)
NF = 16
# int rows of I
I_STATUS, I_BUSY, I_TGEN, I_CGEN, I_RGEN, I_MUTED, I_NTX, I_NBCAST = range(8)
NI = 8
# global floats
G_NOW, G_NEXT_TICK, G_NEXT_UNLOCK = range(3)
NG = 3
# global ints
GI_HSIZE, GI_EVENTS, GI_UNLOCKS, GI_LOGN, GI_TRACE, GI_TICKS, GI_ERR = range(7)
NGI = 7
# float params
(P_T, P_DB, P_DELTA, P_TICK, P_K, P_TADAPT, P_ZCAP, P_NU, P_XIMAX, P_TCONG) = range(10)
NP = 10
# int params
(PI_DIST, PI_ADAPT, PI_ARR, PI_CONG, PI_FREEZE, PI_LOG, PI_DEBUG, PI_TONE_UNIFORM) = range(8)
NPI = 8

RET_DONE, RET_LOG_FULL, RET_HEAP_FULL, RET_INVARIANT = 0, 1, 2, 4


# ---------------------------------------------------------------- heap


@njit(cache=True)
def _less(HT, HK, i, j):
    return HT[i] < HT[j] or (HT[i] == HT[j] and HK[i] < HK[j])


@njit(cache=True)
def _swap(HT, HK, HG, i, j):
    HT[i], HT[j] = HT[j], HT[i]
    HK[i], HK[j] = HK[j], HK[i]
    HG[i], HG[j] = HG[j], HG[i]


@njit(cache=True)
def _sift_down(HT, HK, HG, i, n):
    while True:
        c = 2 * i + 1
        if c >= n:
            return
        if c + 1 < n and _less(HT, HK, c + 1, c):
            c += 1
        if _less(HT, HK, c, i):
            _swap(HT, HK, HG, i, c)
            i = c
        else:
            return


@njit(cache=True)
def _push(HT, HK, HG, GI, t, key, gen):
    i = GI[GI_HSIZE]
    HT[i] = t
    HK[i] = key
    HG[i] = gen
    GI[GI_HSIZE] = i + 1
    while i > 0:
        p = (i - 1) // 2
        if _less(HT, HK, i, p):
            _swap(HT, HK, HG, i, p)
            i = p
        else:
            break


@njit(cache=True)
def _pop(HT, HK, HG, GI):
    n = GI[GI_HSIZE] - 1
    GI[GI_HSIZE] = n
    if n > 0:
        HT[0] = HT[n]
        HK[0] = HK[n]
        HG[0] = HG[n]
        _sift_down(HT, HK, HG, 0, n)


@njit(cache=True)
def _valid(I, key, gen):
    l = key // KSHIFT
    kind = key % KSHIFT
    if kind == EV_TXEND or kind == EV_BACKOFF:
        return gen == I[I_TGEN, l]
    if kind == EV_COUNTER:
        return gen == I[I_CGEN, l]
    if kind == EV_REJOIN:
        return gen == I[I_RGEN, l]
    return True


@njit(cache=True)
def _compact(HT, HK, HG, GI, I):
    n = GI[GI_HSIZE]
    m = 0
    for i in range(n):
        if _valid(I, HK[i], HG[i]):
            HT[m] = HT[i]
            HK[m] = HK[i]
            HG[m] = HG[i]
            m += 1
    GI[GI_HSIZE] = m
    for i in range(m // 2 - 1, -1, -1):
        _sift_down(HT, HK, HG, i, m)


# ---------------------------------------------------------------- link actions


@njit(cache=True)
def _sync(F, I, l, now):
    dt = now - F[F_QT, l]
    if dt <= 0.0:
        return
    s = 1.0 if I[I_STATUS, l] == TRANSMIT else 0.0
    a = F[F_INFLOW, l]
    q, qi, pi, served = fluid_step(F[F_Q, l], a, s, dt)
    F[F_Q, l] = q
    F[F_QINT, l] += qi
    F[F_PINT, l] += pi
    F[F_SERVED, l] += served
    F[F_ARR, l] += a * dt
    F[F_QT, l] = now


@njit(cache=True)
def _log(LT, LL, LE, GI, PI, t, l, code):
    if PI[PI_LOG] != 0:
        n = GI[GI_LOGN]
        LT[n] = t
        LL[n] = l
        LE[n] = code
        GI[GI_LOGN] = n + 1


@njit(cache=True)
def _start_backoff(F, I, PI, rs, HT, HK, HG, GI, l, now):
    if PI[PI_FREEZE] != 0 and F[F_RESID, l] > 0.0:
        d = F[F_RESID, l]
        F[F_RESID, l] = -1.0
    else:
        d = exponential(rs, STREAM_CHANNEL, l, F[F_Z, l])
    I[I_STATUS, l] = BACKOFF
    I[I_TGEN, l] += 1
    F[F_TIMER, l] = now + d
    _push(HT, HK, HG, GI, now + d, l * KSHIFT + EV_BACKOFF, I[I_TGEN, l])


@njit(cache=True)
def _cancel_backoff(F, I, PI, l, now):
    if PI[PI_FREEZE] != 0:
        F[F_RESID, l] = F[F_TIMER, l] - now
    I[I_STATUS, l] = IDLE
    I[I_TGEN, l] += 1


@njit(cache=True)
def _start_tx(F, I, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now):
    _sync(F, I, l, now)
    if PI[PI_DEBUG] != 0:
        if I[I_BUSY, l] != 0:
            GI[GI_ERR] = 1
        for p in range(indptr[l], indptr[l + 1]):
            if I[I_STATUS, indices[p]] == TRANSMIT:
                GI[GI_ERR] = 1
    I[I_STATUS, l] = TRANSMIT
    I[I_NTX, l] += 1
    F[F_TXSTART, l] = now
    d = exponential(rs, STREAM_CHANNEL, l, 1.0)
    I[I_TGEN, l] += 1
    F[F_TIMER, l] = now + d
    _push(HT, HK, HG, GI, now + d, l * KSHIFT + EV_TXEND, I[I_TGEN, l])
    for p in range(indptr[l], indptr[l + 1]):
        m = indices[p]
        I[I_BUSY, m] += 1
        if I[I_STATUS, m] == BACKOFF:
            _cancel_backoff(F, I, PI, m, now)
    _log(LT, LL, LE, GI, PI, now, l, LOG_TX_START)


@njit(cache=True)
def _stop_tx(F, I, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now):
    """End l's transmission; neighbours that now sense idle draw backoffs."""
    _sync(F, I, l, now)
    I[I_STATUS, l] = IDLE
    I[I_TGEN, l] += 1
    F[F_ACT, l] += now - F[F_TXSTART, l]
    _log(LT, LL, LE, GI, PI, now, l, LOG_TX_END)
    for p in range(indptr[l], indptr[l + 1]):
        m = indices[p]
        I[I_BUSY, m] -= 1
        if PI[PI_DEBUG] != 0 and I[I_BUSY, m] < 0:
            GI[GI_ERR] = 2
        if I[I_BUSY, m] == 0 and I[I_STATUS, m] == IDLE and I[I_MUTED, m] == 0:
            _start_backoff(F, I, PI, rs, HT, HK, HG, GI, m, now)


@njit(cache=True)
def _reset_all(F, I, PI, rs, HT, HK, HG, GI, LT, LL, LE, now):
    """Silence every link, then every unmuted link draws a fresh backoff."""
    L = F.shape[1]
    for l in range(L):
        st = I[I_STATUS, l]
        if st == TRANSMIT:
            _sync(F, I, l, now)
            F[F_ACT, l] += now - F[F_TXSTART, l]
            _log(LT, LL, LE, GI, PI, now, l, LOG_TX_END)
        I[I_STATUS, l] = IDLE
        I[I_TGEN, l] += 1
        I[I_BUSY, l] = 0
        F[F_RESID, l] = -1.0
    for l in range(L):
        if I[I_MUTED, l] == 0:
            _start_backoff(F, I, PI, rs, HT, HK, HG, GI, l, now)


@njit(cache=True)
def _try_broadcast(F, I, P, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now):
    T = P[P_T]
    if now - F[F_LASTB, l] < 0.5 * T:
        return
    F[F_LASTB, l] = now
    F[F_TLAST2, l] = F[F_TLAST1, l]
    F[F_TLAST1, l] = now
    I[I_NBCAST, l] += 1
    two_delta = 2.0 * P[P_DELTA]
    u = uniform(rs, STREAM_PROTOCOL, l)
    if F[F_TLAST1, l] - F[F_TLAST2, l] <= T:
        tb = two_delta * u
    else:
        tb = -two_delta * u
    I[I_CGEN, l] += 1
    _push(HT, HK, HG, GI, now + T + tb, l * KSHIFT + EV_COUNTER, I[I_CGEN, l])
    for p in range(indptr[l], indptr[l + 1]):
        m = indices[p]
        d = P[P_DB]
        if PI[PI_TONE_UNIFORM] != 0:
            d = P[P_DB] * uniform(rs, STREAM_PROTOCOL, l)
        _push(HT, HK, HG, GI, now + d, m * KSHIFT + EV_TONE, 0)
    _log(LT, LL, LE, GI, PI, now, l, LOG_BROADCAST)
    st = I[I_STATUS, l]
    # mute first so the neighbour callbacks in _stop_tx cannot re-arm l
    I[I_MUTED, l] = 1
    if st == TRANSMIT:
        _stop_tx(F, I, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now)
    elif st == BACKOFF:
        _cancel_backoff(F, I, PI, l, now)
        F[F_RESID, l] = -1.0
    I[I_RGEN, l] += 1
    _push(HT, HK, HG, GI, now + two_delta * uniform(rs, STREAM_PROTOCOL, l),
          l * KSHIFT + EV_REJOIN, I[I_RGEN, l])


@njit(cache=True)
def _tick(F, I, P, PI, rs, GI, now):
    L = F.shape[1]
    k = GI[GI_TICKS] + 1
    GI[GI_TICKS] = k
    kind = PI[PI_ARR]
    for l in range(L):
        _sync(F, I, l, now)
        if kind != KIND_NONE and kind != KIND_TRACE:
            c = slot_count(kind, F[F_LAM, l], k, rs, l)
            if c > 0:
                F[F_Q, l] += c
                F[F_ARR, l] += c
        if PI[PI_CONG] != 0:
            F[F_INFLOW, l] = admit_log(F[F_Q, l], P[P_NU], P[P_TCONG], P[P_XIMAX])
        if PI[PI_ADAPT] != 0:
            e = F[F_Q, l] / (P[P_K] * P[P_TADAPT])
            if e > P[P_ZCAP]:
                e = P[P_ZCAP]
            F[F_Z, l] = math.exp(e)


@njit(cache=True)
def _advance(until, G, GI, P, PI, F, I, indptr, indices, rs, HT, HK, HG,
             tr_t, tr_l, LT, LL, LE, maxdeg):
    L = F.shape[1]
    cap = HT.size
    need = L + maxdeg + 8
    while True:
        if GI[GI_ERR] != 0:
            return RET_INVARIANT
        if PI[PI_LOG] != 0 and GI[GI_LOGN] + need > LT.size:
            return RET_LOG_FULL
        if GI[GI_HSIZE] + need > cap:
            _compact(HT, HK, HG, GI, I)
            if GI[GI_HSIZE] + need > cap:
                return RET_HEAP_FULL
        while GI[GI_HSIZE] > 0 and not _valid(I, HK[0], HG[0]):
            _pop(HT, HK, HG, GI)
        th = HT[0] if GI[GI_HSIZE] > 0 else INF
        ttr = tr_t[GI[GI_TRACE]] if GI[GI_TRACE] < tr_t.size else INF
        tg = min(ttr, G[G_NEXT_TICK], G[G_NEXT_UNLOCK])
        if th <= tg:
            if th > until:
                break
            key = HK[0]
            _pop(HT, HK, HG, GI)
            now = th
            G[G_NOW] = now
            l = key // KSHIFT
            kind = key % KSHIFT
            if kind == EV_BACKOFF:
                _start_tx(F, I, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now)
            elif kind == EV_TXEND:
                _stop_tx(F, I, PI, indptr, indices, rs, HT, HK, HG, GI, LT, LL, LE, l, now)
                if I[I_MUTED, l] == 0 and I[I_BUSY, l] == 0:
                    _start_backoff(F, I, PI, rs, HT, HK, HG, GI, l, now)
            elif kind == EV_COUNTER or kind == EV_TONE:
                _try_broadcast(F, I, P, PI, indptr, indices, rs, HT, HK, HG, GI,
                               LT, LL, LE, l, now)
            elif kind == EV_REJOIN:
                I[I_MUTED, l] = 0
                _log(LT, LL, LE, GI, PI, now, l, LOG_REJOIN)
                if I[I_BUSY, l] == 0 and I[I_STATUS, l] == IDLE:
                    _start_backoff(F, I, PI, rs, HT, HK, HG, GI, l, now)
        else:
            if tg > until:
                break
            now = tg
            G[G_NOW] = now
            if ttr == tg:
                j = GI[GI_TRACE]
                l = tr_l[j]
                _sync(F, I, l, now)
                F[F_Q, l] += 1.0
                F[F_ARR, l] += 1.0
                GI[GI_TRACE] = j + 1
            elif G[G_NEXT_TICK] == tg:
                _tick(F, I, P, PI, rs, GI, now)
                G[G_NEXT_TICK] = now + P[P_TICK]
            else:
                _reset_all(F, I, PI, rs, HT, HK, HG, GI, LT, LL, LE, now)
                _log(LT, LL, LE, GI, PI, now, -1, LOG_UNLOCK)
                GI[GI_UNLOCKS] += 1
                G[G_NEXT_UNLOCK] = now + P[P_T]
        GI[GI_EVENTS] += 1
    G[G_NOW] = until
    for l in range(L):
        _sync(F, I, l, until)
    return RET_DONE


# ---------------------------------------------------------------- Python API


class Simulator:
    """One CSMA run on a fixed interference graph.

    ``z`` is a scalar or per-link array of attempt rates.  Optional layers:

    * ``unlock_period``: global unlock at every multiple of it (ideal U-CSMA).
    * ``busy_tone=(T, delta_b, delta)``: distributed unlocking instead.
    * ``arrivals``: an :class:`~ucsma.arrivals.ArrivalProcess`.
    * ``adaptive=(k, T, zcap)``: ``z_l = exp(min(Q_l/(kT), zcap))`` at every tick.
    * ``congestion``: a :class:`~ucsma.congestion.FlowController`.
    """

    def __init__(self, graph, z=1.0, *, seed=0, unlock_period=None, busy_tone=None,
                 tone_uniform=False, arrivals=None, adaptive=None, congestion=None,
                 freeze_backoff=False, log_events=False, debug=False, tick=1.0,
                 initial_queue=0.0):
        L = graph.L
        self.graph = graph
        self.seed = int(seed)
        zz = np.broadcast_to(np.asarray(z, dtype=float), (L,)).copy()
        if np.any(~np.isfinite(zz)) or np.any(zz <= 0):
            raise ConfigError("attempt rates must be positive and finite")
        if unlock_period is not None and busy_tone is not None:
            raise ConfigError("choose either ideal or distributed unlocking")
        self.indptr = graph.indptr.astype(np.int64)
        self.indices = graph.indices.astype(np.int64)
        self.maxdeg = int(np.max(np.diff(self.indptr))) if L else 0
        self.rs = make_streams(self.seed, L)

        self.F = np.zeros((NF, L))
        self.F[F_Z] = zz
        self.F[F_RESID] = -1.0
        self.F[F_Q] = initial_queue
        self.F[F_LASTB] = -INF
        self.F[F_TLAST2] = -INF
        self.I = np.zeros((NI, L), dtype=np.int64)
        self.G = np.zeros(NG)
        self.GI = np.zeros(NGI, dtype=np.int64)
        self.P = np.zeros(NP)
        self.PI = np.zeros(NPI, dtype=np.int64)
        self.P[P_T] = INF
        self.P[P_TICK] = tick

        need_tick = False
        self.G[G_NEXT_UNLOCK] = INF
        if unlock_period is not None and np.isfinite(unlock_period):
            if unlock_period <= 0:
                raise ConfigError("unlock period must be positive")
            self.P[P_T] = unlock_period
            self.G[G_NEXT_UNLOCK] = unlock_period
        if busy_tone is not None:
            T, db, delta = busy_tone
            if not (T > 0 and 0 <= db <= delta and 2 * delta < 0.5 * T):
                raise ConfigError("busy tone needs 0 <= delta_b <= delta and 4*delta < T")
            self.P[P_T], self.P[P_DB], self.P[P_DELTA] = T, db, delta
            self.PI[PI_DIST] = 1
            self.PI[PI_TONE_UNIFORM] = int(tone_uniform)

        self.tr_t = np.zeros(0)
        self.tr_l = np.zeros(0, dtype=np.int64)
        if arrivals is not None:
            self.PI[PI_ARR] = arrivals.code
            if arrivals.code == KIND_TRACE:
                links, times = arrivals.trace
                order = np.lexsort((np.asarray(links), np.asarray(times, dtype=float)))
                self.tr_t = np.asarray(times, dtype=float)[order]
                self.tr_l = np.asarray(links, dtype=np.int64)[order]
            elif arrivals.code != KIND_NONE:
                self.F[F_LAM] = arrivals.rates(L)
                need_tick = True
        if adaptive is not None:
            k, T, zcap = adaptive
            if k < 1 or T <= 0:
                raise ConfigError("adaptive rates need k >= 1 and T > 0")
            self.PI[PI_ADAPT] = 1
            self.P[P_K], self.P[P_TADAPT], self.P[P_ZCAP] = k, T, zcap
            self.F[F_Z] = np.exp(np.minimum(self.F[F_Q] / (k * T), zcap))
            need_tick = True
        if congestion is not None:
            self.PI[PI_CONG] = 1
            self.P[P_NU], self.P[P_XIMAX], self.P[P_TCONG] = congestion.nu, congestion.xi_max, congestion.T
            self.F[F_INFLOW] = [admit_log(q, congestion.nu, congestion.T, congestion.xi_max)
                                for q in self.F[F_Q]]
            need_tick = True
        self.G[G_NEXT_TICK] = tick if need_tick else INF
        self.PI[PI_FREEZE] = int(freeze_backoff)
        self.PI[PI_LOG] = int(log_events)
        self.PI[PI_DEBUG] = int(debug)

        cap = max(64, 4 * (L + self.maxdeg + 8) + 2 * len(self.indices))
        self.HT = np.zeros(cap)
        self.HK = np.zeros(cap, dtype=np.int64)
        self.HG = np.zeros(cap, dtype=np.int64)
        lcap = (4 * (L + self.maxdeg + 8) + 1024) if log_events else 1
        self.LT = np.zeros(lcap)
        self.LL = np.zeros(lcap, dtype=np.int64)
        self.LE = np.zeros(lcap, dtype=np.int64)
        self._log_chunks = []

        if busy_tone is not None:
            # joining at t = 0: t_last1 = 0 and the counter runs for T
            for l in range(L):
                self.I[I_CGEN, l] = 1
                _push(self.HT, self.HK, self.HG, self.GI, self.P[P_T],
                      l * KSHIFT + EV_COUNTER, 1)
        _reset_all(self.F, self.I, self.PI, self.rs, self.HT, self.HK, self.HG, self.GI,
                   self.LT, self.LL, self.LE, 0.0)

    # -- running

    @property
    def now(self) -> float:
        return float(self.G[G_NOW])

    @property
    def L(self) -> int:
        return self.graph.L

    @property
    def events(self) -> int:
        return int(self.GI[GI_EVENTS])

    @property
    def unlocks(self) -> int:
        return int(self.GI[GI_UNLOCKS])

    def advance(self, until: float) -> "Simulator":
        if until < self.now:
            raise ConfigError(f"cannot advance backwards ({until} < {self.now})")
        while True:
            ret = _advance(float(until), self.G, self.GI, self.P, self.PI, self.F, self.I,
                           self.indptr, self.indices, self.rs, self.HT, self.HK, self.HG,
                           self.tr_t, self.tr_l, self.LT, self.LL, self.LE, self.maxdeg)
            if ret == RET_DONE:
                return self
            if ret == RET_LOG_FULL:
                self._flush_log()
            elif ret == RET_HEAP_FULL:
                self._grow_heap()
            else:
                raise AssertionError(f"scheduling invariant violated (code {self.GI[GI_ERR]})")

    def _grow_heap(self):
        n = self.HT.size
        for name in ("HT", "HK", "HG"):
            old = getattr(self, name)
            new = np.zeros(2 * n, dtype=old.dtype)
            new[:n] = old
            setattr(self, name, new)

    def _flush_log(self):
        n = int(self.GI[GI_LOGN])
        self._log_chunks.append((self.LT[:n].copy(), self.LL[:n].copy(), self.LE[:n].copy()))
        self.GI[GI_LOGN] = 0

    def unlock_all(self) -> None:
        _reset_all(self.F, self.I, self.PI, self.rs, self.HT, self.HK, self.HG, self.GI,
                   self.LT, self.LL, self.LE, self.now)
        _log(self.LT, self.LL, self.LE, self.GI, self.PI, self.now, -1, LOG_UNLOCK)

    # -- observation

    @property
    def status(self) -> np.ndarray:
        return self.I[I_STATUS]

    def active_mask(self) -> np.ndarray:
        return self.I[I_STATUS] == TRANSMIT

    def active_links(self) -> np.ndarray:
        return np.flatnonzero(self.active_mask())

    def active_density(self) -> float:
        return float(np.count_nonzero(self.active_mask())) / self.L

    def idle_sensing_density(self) -> float:
        """Fraction of links that are not transmitting yet sense the channel idle."""
        m = (self.I[I_STATUS] != TRANSMIT) & (self.I[I_BUSY] == 0) & (self.I[I_MUTED] == 0)
        return float(np.count_nonzero(m)) / self.L

    def sense_idle(self, link: int) -> bool:
        nb = self.indices[self.indptr[link]:self.indptr[link + 1]]
        return not np.any(self.I[I_STATUS, nb] == TRANSMIT)

    def active_time(self) -> np.ndarray:
        """Cumulative transmitting time per link up to now."""
        act = self.F[F_ACT].copy()
        on = self.active_mask()
        act[on] += self.now - self.F[F_TXSTART, on]
        return act

    @property
    def z(self) -> np.ndarray:
        return self.F[F_Z]

    @property
    def queue(self) -> np.ndarray:
        return self.F[F_Q]

    @property
    def queue_integral(self) -> np.ndarray:
        return self.F[F_QINT]

    @property
    def packet_integral(self) -> np.ndarray:
        return self.F[F_PINT]

    @property
    def arrived(self) -> np.ndarray:
        return self.F[F_ARR]

    @property
    def served(self) -> np.ndarray:
        return self.F[F_SERVED]

    @property
    def broadcasts(self) -> np.ndarray:
        return self.I[I_NBCAST]

    def event_log(self):
        """``(time, link, code)`` arrays of everything logged so far."""
        self._flush_log()
        if not self._log_chunks:
            return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        t, l, e = zip(*self._log_chunks)
        merged = np.concatenate(t), np.concatenate(l), np.concatenate(e)
        self._log_chunks = [merged]
        return merged

    def export_trace(self, path) -> None:
        import csv

        t, l, e = self.event_log()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "link", "event"])
            for ti, li, ei in zip(t, l, e):
                w.writerow([repr(float(ti)), int(li), LOG_NAMES[ei]])

    def check_independent(self) -> bool:
        return self.graph.is_independent(self.active_links())


def delta_from_theta(theta: float) -> float:
    return 0.5 - theta
