"""Packet-level NewReno event loop.

This file is plain Python and runs as-is.  When the extension is built,
Cython compiles the same source with the declarations in ``_kernel.pxd``
and the compiled module shadows this one on import.

Network model: sender -> access link (FIFO) -> router -> bottleneck
(FIFO, infinite buffer) -> drop module -> receiver.  Both links are
deterministic FIFOs fed in send order, so each packet's departure time,
its fate at the drop module and the cumulative ack it elicits are fixed
the moment it is sent.  Acks travel back on an uncongested path with a
constant delay and therefore reach the sender in send order.  The only
pending events are that ordered ack stream and the retransmit timer.
"""

from array import array

import numpy as np

INF = float("inf")
DRAW_BLOCK = 1 << 16

# accounting elements
EL_RTT = 0
EL_TD = 1
EL_TDFR = 2
EL_TDTO = 3
EL_TO = 4
EL_RTX_LOST = 5
N_EL = 6

# segment boundaries
M_CHANGE = 0
M_TD = 1
M_FR = 2
M_TO = 3
M_END = 4


class RtoEstimator:
    """Retransmission timeout per RFC 6298 with zero clock granularity."""

    def __init__(self, min_rto=1.0, initial_rto=1.0, max_backoff=5):
        self.min_rto = min_rto
        self.max_backoff = max_backoff
        self.srtt = 0.0
        self.rttvar = 0.0
        self.rto = initial_rto
        self.samples = 0
        self.backoff = 0

    def sample(self, r):
        if self.samples == 0:
            self.srtt = r
            self.rttvar = r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        self.samples += 1
        self.rto = max(self.min_rto, self.srtt + 4 * self.rttvar)

    def current(self):
        """Timer duration including exponential backoff."""
        return self.rto * (1 << self.backoff)

    def back_off(self):
        if self.backoff < self.max_backoff:
            self.backoff += 1


class Kernel:
    """One simulation run.  Construct, call :meth:`run`, read the fields."""

    def __init__(
        self,
        w_r,
        rtt,
        delta,
        delta1,
        p,
        n_packets,
        seed,
        min_rto=1.0,
        initial_rto=1.0,
        initial_window=2,
        max_backoff=5,
        no_drop_rtx_td=False,
        no_drop_rtx_all=False,
        forced_drops=(),
        trace=None,
    ):
        self.w_r = w_r
        self.rtt = rtt
        self.delta = delta
        self.delta1 = delta1
        self.ack_delay = rtt - delta - delta1
        self.p = p
        self.n_packets = n_packets
        self.no_drop_rtx_td = no_drop_rtx_td
        self.no_drop_rtx_all = no_drop_rtx_all
        self.trace = trace

        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.draws = array("d", self.rng.random(DRAW_BLOCK).tobytes())
        self.draw_pos = 0
        forced = sorted(set(int(x) for x in forced_drops))
        forced.append(-1)
        self.forced = array("q", forced)
        self.forced_pos = 0

        self.est = RtoEstimator(min_rto, initial_rto, max_backoff)

        self.now = 0.0
        self.done = False
        self.cwnd = min(initial_window, w_r)
        self.ssthresh = w_r
        self.ack_cnt = 0
        self.una = 0
        self.nxt = 0
        self.max_sent = 0
        self.recover = -1
        self.in_fr = False
        self.dup_count = 0
        self.timer = INF
        self.rtt_seq = -1
        self.rtt_sent_at = 0.0
        self.fr_rtx = 0
        self.rec_xtd = -1
        self.last_rec_xtd = -1
        self.after_fr = False

        # ack stream as a growable ring
        self.aq_cap = 4 * w_r + 16
        self.aq_time = array("d", bytes(8 * self.aq_cap))
        self.aq_no = array("q", bytes(8 * self.aq_cap))
        self.aq_head = 0
        self.aq_len = 0

        self.access_free = 0.0
        self.bn_free = 0.0
        self.rcv_nxt = 0
        self.ooo = bytearray(w_r + 1)
        self.max_backlog = 0
        self.backlog = 0

        self.n_sent = 0
        self.n_new = 0
        self.n_rtx = 0
        self.n_drops = 0
        self.n_acks = 0
        self.n_dupacks = 0
        self.n_td = 0
        self.n_to = 0
        self.n_to_repeat = 0
        self.n_tdto = 0
        self.n_fr = 0
        self.n_tofrxtd = 0
        self.n_changes = 0
        self.traffic_packets = 0
        self.rxt_fr = array("q", bytes(8 * 4))

        self.el_pk = array("q", bytes(8 * N_EL))
        self.el_t = array("d", bytes(8 * N_EL))
        self.hist = array("q", bytes(8 * (w_r + 1)))
        self.pk_w = array("q", bytes(8 * (w_r + 1)))
        self.t_w = array("d", bytes(8 * (w_r + 1)))
        # typed views of the arrays above for the compiled build
        self.v_rxt_fr = self.rxt_fr
        self.v_el_pk = self.el_pk
        self.v_el_t = self.el_t
        self.v_hist = self.hist
        self.v_pk_w = self.pk_w
        self.v_t_w = self.t_w

        self.seg_kind = 0
        self.seg_start = 0.0
        self.seg_w = self.cwnd
        self.seg_pk_first = 0
        self.seg_pk_later = 0
        self.v_hist[self.cwnd] += 1
        self.n_changes += 1

    # -- tracing -----------------------------------------------------------

    def _log(self, kind, seq):
        self.trace.append((self.now, kind, seq, self.cwnd, self.ssthresh, self.in_fr))

    # -- accounting --------------------------------------------------------

    def _close(self, marker):
        dur = self.now - self.seg_start
        pk = self.seg_pk_first + self.seg_pk_later
        self.v_pk_w[self.seg_w] += pk
        self.v_t_w[self.seg_w] += dur
        if self.seg_kind == 1:
            el = EL_TDTO if marker == M_TO else EL_TDFR
            self.v_el_pk[el] += pk
            self.v_el_t[el] += dur
        elif marker == M_TD or marker == M_TO:
            # the first RTT after the last window change is normal operation
            first = dur if dur < self.rtt else self.rtt
            if marker == M_TD:
                el = EL_TD
            elif self.seg_w == 1:
                el = EL_RTX_LOST
            else:
                el = EL_TO
            self.v_el_pk[EL_RTT] += self.seg_pk_first
            self.v_el_t[EL_RTT] += first
            self.v_el_pk[el] += self.seg_pk_later
            self.v_el_t[el] += dur - first
        else:
            self.v_el_pk[EL_RTT] += pk
            self.v_el_t[EL_RTT] += dur

    def _open(self, kind, w):
        self.seg_kind = kind
        self.seg_start = self.now
        self.seg_w = w
        self.seg_pk_first = 0
        self.seg_pk_later = 0

    def _window_change(self, w, marker):
        self._close(marker)
        self.v_hist[w] += 1
        self.n_changes += 1
        self.ack_cnt = 0
        self._open(0, w)

    # -- network -----------------------------------------------------------

    def _draw(self):
        if self.draw_pos == DRAW_BLOCK:
            self.draws = array("d", self.rng.random(DRAW_BLOCK).tobytes())
            self.draw_pos = 0
        u = self.draws[self.draw_pos]
        self.draw_pos += 1
        return u

    def _push_ack(self, t, ackno):
        if self.aq_len == self.aq_cap:
            self._grow_acks()
        i = (self.aq_head + self.aq_len) % self.aq_cap
        self.aq_time[i] = t
        self.aq_no[i] = ackno
        self.aq_len += 1

    def _grow_acks(self):
        cap = self.aq_cap
        times = array("d", bytes(16 * cap))
        nos = array("q", bytes(16 * cap))
        for k in range(self.aq_len):
            j = (self.aq_head + k) % cap
            times[k] = self.aq_time[j]
            nos[k] = self.aq_no[j]
        self.aq_time = times
        self.aq_no = nos
        self.aq_head = 0
        self.aq_cap = 2 * cap

    def _transmit(self, seq):
        """Put one data packet on the wire at ``now``."""
        is_rtx = seq < self.max_sent
        if is_rtx:
            self.n_rtx += 1
        else:
            self.max_sent = seq + 1
            self.n_new += 1
            if self.rtt_seq < 0 and not self.in_fr:
                self.rtt_seq = seq
                self.rtt_sent_at = self.now
        if self.in_fr and seq > self.rec_xtd:
            self.rec_xtd = seq
        self.n_sent += 1
        self.traffic_packets += 1
        if self.seg_kind == 0 and self.now >= self.seg_start + self.rtt:
            self.seg_pk_later += 1
        else:
            self.seg_pk_first += 1
        if self.timer == INF:
            self.timer = self.now + self.est.current()
        if self.n_sent == self.n_packets:
            self.done = True

        dep = self.now if self.now > self.access_free else self.access_free
        dep += self.delta1
        self.access_free = dep
        arrival = dep
        backlog = 1
        if self.bn_free > arrival:
            backlog += int((self.bn_free - arrival) / self.delta + 0.999999)
            dep = self.bn_free + self.delta
        else:
            dep = arrival + self.delta
        self.bn_free = dep
        self.backlog = backlog
        if backlog > self.max_backlog:
            self.max_backlog = backlog

        u = self._draw()
        dropped = u < self.p
        if not is_rtx and seq == self.forced[self.forced_pos]:
            dropped = True
            self.forced_pos += 1
        if dropped and is_rtx:
            if self.no_drop_rtx_all or (self.no_drop_rtx_td and self.in_fr):
                dropped = False
        if self.trace is not None:
            self._log("rtx" if is_rtx else "send", seq)
            if dropped:
                self._log("drop", seq)
        if dropped:
            self.n_drops += 1
            return

        # receiver: cumulative ack, out-of-order packets held in a ring
        size = self.w_r + 1
        if seq == self.rcv_nxt:
            self.rcv_nxt += 1
            while self.ooo[self.rcv_nxt % size]:
                self.ooo[self.rcv_nxt % size] = 0
                self.rcv_nxt += 1
        elif seq > self.rcv_nxt:
            self.ooo[seq % size] = 1
        self._push_ack(dep + self.ack_delay, self.rcv_nxt)

    def _send_available(self):
        while not self.done and self.nxt - self.una < self.cwnd:
            self._transmit(self.nxt)
            self.nxt += 1

    # -- sender events -----------------------------------------------------

    def _on_ack(self, ackno):
        self.n_acks += 1
        if ackno > self.una:
            if self.in_fr:
                if ackno > self.recover:
                    self._full_ack(ackno)
                else:
                    self._partial_ack(ackno)
            else:
                self._new_ack(ackno)
        elif self.max_sent > self.una:
            self.n_dupacks += 1
            if self.in_fr:
                if self.trace is not None:
                    self._log("dupack", ackno)
                if self.cwnd < self.w_r:
                    self.cwnd += 1
                self._send_available()
            else:
                self.dup_count += 1
                if self.dup_count == 3 and self.una > self.recover:
                    self._triple_dup()

    def _new_ack(self, ackno):
        self.una = ackno
        if self.nxt < self.una:
            self.nxt = self.una
        self.dup_count = 0
        self.est.backoff = 0
        if self.rtt_seq >= 0 and ackno > self.rtt_seq:
            self.est.sample(self.now - self.rtt_sent_at)
            self.rtt_seq = -1
        if self.trace is not None:
            self._log("ack", ackno)
        if self.cwnd < self.w_r and self.cwnd <= self.ssthresh:
            self.cwnd += 1
            self._window_change(self.cwnd, M_CHANGE)
        else:
            self.ack_cnt += 1
            if self.ack_cnt >= self.cwnd:
                if self.cwnd < self.w_r:
                    self.cwnd += 1
                self._window_change(self.cwnd, M_CHANGE)
        self._restart_timer()
        self._send_available()

    def _restart_timer(self):
        if self.una < self.max_sent:
            self.timer = self.now + self.est.current()
        else:
            self.timer = INF

    def _triple_dup(self):
        if self.trace is not None:
            self._log("td", self.una)
        self._close(M_TD)
        self.n_td += 1
        flight = self.nxt - self.una
        self.ssthresh = flight // 2 if flight // 2 > 2 else 2
        self.recover = self.max_sent - 1
        self.in_fr = True
        self.cwnd = self.ssthresh + 3
        if self.cwnd > self.w_r:
            self.cwnd = self.w_r
        self.rtt_seq = -1
        self.rec_xtd = self.max_sent - 1
        self.fr_rtx = 1
        self._open(1, self.seg_w)
        self.timer = INF
        self._transmit(self.una)
        self.timer = self.now + self.est.current()

    def _partial_ack(self, ackno):
        newly = ackno - self.una
        self.una = ackno
        if self.nxt < self.una:
            self.nxt = self.una
        self.cwnd = self.cwnd - newly + 1 if self.cwnd > newly else 1
        self.fr_rtx += 1
        if self.trace is not None:
            self._log("partial", ackno)
        self._transmit(self.una)
        self._send_available()

    def _full_ack(self, ackno):
        self.una = ackno
        if self.nxt < self.una:
            self.nxt = self.una
        self.in_fr = False
        self.dup_count = 0
        self.est.backoff = 0
        self.n_fr += 1
        self.v_rxt_fr[self.fr_rtx if self.fr_rtx < 3 else 3] += 1
        self.after_fr = True
        self.last_rec_xtd = self.rec_xtd
        self.cwnd = self.ssthresh + 1
        if self.cwnd > self.w_r:
            self.cwnd = self.w_r
        self._window_change(self.cwnd, M_FR)
        if self.trace is not None:
            self._log("fr", ackno)
        self._restart_timer()
        self._send_available()

    def _on_timeout(self):
        self._close(M_TO)
        self.n_to += 1
        if self.in_fr:
            self.n_tdto += 1
        if self.est.backoff == 0:
            flight = self.nxt - self.una
            self.ssthresh = flight // 2 if flight // 2 > 2 else 2
            self.recover = self.max_sent - 1
            if self.after_fr and not self.in_fr and self.una <= self.last_rec_xtd:
                self.n_tofrxtd += 1
        else:
            self.n_to_repeat += 1
            self.recover = -1
        self.after_fr = False
        self.est.back_off()
        self.in_fr = False
        self.dup_count = 0
        self.rtt_seq = -1
        self.cwnd = 1
        self.nxt = self.una
        self.v_hist[1] += 1
        self.n_changes += 1
        self.ack_cnt = 0
        self._open(0, 1)
        if self.trace is not None:
            self._log("timeout", self.una)
        self.timer = INF
        self._send_available()
        self.timer = self.now + self.est.current()

    # -- main loop ---------------------------------------------------------

    def run(self):
        self._send_available()
        while not self.done:
            if self.aq_len > 0 and self.aq_time[self.aq_head] <= self.timer:
                # acks win ties against the timer
                self.now = self.aq_time[self.aq_head]
                ackno = self.aq_no[self.aq_head]
                self.aq_head = (self.aq_head + 1) % self.aq_cap
                self.aq_len -= 1
                self._on_ack(ackno)
            elif self.timer < INF:
                self.now = self.timer
                self.timer = INF
                self._on_timeout()
            else:
                raise RuntimeError("simulation stalled: no pending ack and no timer")
        self._close(M_END)
