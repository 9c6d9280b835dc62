"""Topic bus: delivery modes, rate law, ordering, and introspection."""

from __future__ import annotations

import json

import numpy as np
import pytest

from flownav.bus import (
    FRAME_QUEUE_BOUND,
    TOPIC_NAVDATA,
    TOPIC_SIGNAL,
    TOPIC_TAKEOFF,
    Bus,
    Empty,
    FixedRate,
    Frame,
    Nav,
    NavData,
    RealTime,
    Twist,
)
from flownav.pilot import TwistCommand


# --- topic names and modes ---------------------------------------------------

def test_topic_name_validation():
    bus = Bus()
    for bad in ("", "a//b", "/", "a/"):
        with pytest.raises(ValueError):
            bus.publish(bad, Empty(0.0))
    bus.publish("ardrone/takeoff", Empty(0.0))  # fine


def test_default_modes():
    bus = Bus()
    bus.publish(TOPIC_NAVDATA, Empty(0.0))
    bus.publish(TOPIC_TAKEOFF, Empty(0.0))
    table = json.loads(bus.introspect())
    assert table[TOPIC_NAVDATA]["mode"] == "fixed@15"
    assert table[TOPIC_TAKEOFF]["mode"] == "realtime"


def test_declare_conflicts_after_use():
    bus = Bus()
    bus.declare("x/y", FixedRate(5))
    bus.publish("x/y", Empty(0.0))
    with pytest.raises(ValueError):
        bus.declare("x/y", RealTime())
    bus.declare("x/y", FixedRate(5))  # same mode is fine


def test_navdata_validation():
    with pytest.raises(ValueError):
        NavData("detecting", 0, 0, 0, altitude=-1.0, battery=50, timestamp=0)
    with pytest.raises(ValueError):
        NavData("detecting", 0, 0, 0, altitude=1.0, battery=101, timestamp=0)
    with pytest.raises(ValueError):
        FixedRate(0)


# --- real-time delivery --------------------------------------------------------

def test_realtime_delivers_to_each_subscriber():
    bus = Bus()
    a = bus.subscribe(TOPIC_TAKEOFF)
    b = bus.subscribe(TOPIC_TAKEOFF)
    bus.publish(TOPIC_TAKEOFF, Empty(0.0))
    assert len(a.drain()) == 1
    assert len(b.drain()) == 1


def test_no_replay_for_late_subscriber():
    bus = Bus()
    bus.publish(TOPIC_TAKEOFF, Empty(0.0))
    late = bus.subscribe(TOPIC_TAKEOFF)
    assert late.drain() == []


def test_publish_without_subscribers_is_noop():
    Bus().publish("lonely/topic", Empty(0.0))


def test_unsubscribe_stops_delivery():
    bus = Bus()
    sub = bus.subscribe(TOPIC_TAKEOFF)
    bus.publish(TOPIC_TAKEOFF, Empty(0.0))
    sub.unsubscribe()
    bus.publish(TOPIC_TAKEOFF, Empty(1.0))
    assert len(sub.drain()) == 1


def test_per_topic_fifo_order():
    bus = Bus()
    sub = bus.subscribe("cmd_vel")
    for k in range(100):
        bus.publish("cmd_vel", Twist(float(k), TwistCommand(linear_x=k / 100)))
    got = [m.twist.linear_x for m in sub.drain()]
    assert got == [k / 100 for k in range(100)]


def test_no_cross_talk():
    bus = Bus()
    a = bus.subscribe("topic/a")
    b = bus.subscribe("topic/b")
    bus.publish("topic/a", Empty(0.0))
    assert len(a.drain()) == 1
    assert b.drain() == []


def test_timestamp_regression_rejected():
    bus = Bus()
    bus.publish("cmd_vel", Empty(5.0))
    with pytest.raises(ValueError):
        bus.publish("cmd_vel", Empty(4.0))


# --- fixed-rate delivery ---------------------------------------------------------

def test_latest_value_wins_between_pumps():
    bus = Bus()
    sub = bus.subscribe(TOPIC_NAVDATA)
    for k in range(3):
        nav = NavData("detecting", 0, 0, 0, altitude=float(k), battery=90,
                      timestamp=float(k))
        bus.publish(TOPIC_NAVDATA, Nav(float(k), nav))
    bus.pump(1.0)
    msgs = sub.drain()
    assert len(msgs) == 1
    assert msgs[0].nav.altitude == 2.0


def test_rate_law_15hz():
    bus = Bus()
    bus.declare("fixed/fifteen", FixedRate(15))
    sub = bus.subscribe("fixed/fifteen")
    dt = 1.0 / 15.0
    t = 0.0
    for k in range(15):
        bus.publish("fixed/fifteen", Empty(t))
        bus.pump(t)
        t += dt
    assert len(sub.drain()) == 15


def test_rate_law_windows():
    # Pump at 60 Hz for 3 s; a 15 Hz topic must emit 45 +- 1.
    bus = Bus()
    bus.declare("fixed/fifteen", FixedRate(15))
    sub = bus.subscribe("fixed/fifteen")
    bus.publish("fixed/fifteen", Empty(0.0))
    for k in range(180):
        bus.pump(k / 60.0)
    n = len(sub.drain())
    assert abs(n - 45) <= 1


def test_silent_publisher_value_reemitted():
    bus = Bus()
    bus.declare("fixed/five", FixedRate(5))
    sub = bus.subscribe("fixed/five")
    bus.publish("fixed/five", Empty(0.0))
    for k in range(11):
        bus.pump(k * 0.1)
    assert len(sub.drain()) == 6  # t = 0.0, 0.2, ..., 1.0


def test_no_stored_value_no_emission():
    bus = Bus()
    sub = bus.subscribe(TOPIC_SIGNAL)
    bus.pump(0.0)
    bus.pump(1.0)
    assert sub.drain() == []


def test_pump_time_regression_rejected():
    bus = Bus()
    bus.pump(1.0)
    with pytest.raises(ValueError):
        bus.pump(0.5)


# --- frame queue bound ------------------------------------------------------------

def test_frame_overflow_drops_oldest():
    bus = Bus()
    sub = bus.subscribe("ardrone/front/image_raw")
    img = np.zeros((2, 2))
    for seq in range(FRAME_QUEUE_BOUND + 10):
        bus.publish("ardrone/front/image_raw", Frame(float(seq), seq, img))
    msgs = sub.drain()
    assert len(msgs) == FRAME_QUEUE_BOUND
    assert msgs[0].seq == 10  # the ten oldest were dropped
    assert msgs[-1].seq == FRAME_QUEUE_BOUND + 9


def test_frame_overflow_spares_other_messages():
    bus = Bus()
    sub = bus.subscribe("mixed/topic")
    img = np.zeros((2, 2))
    bus.publish("mixed/topic", Empty(0.0))
    for seq in range(FRAME_QUEUE_BOUND + 5):
        bus.publish("mixed/topic", Frame(1.0, seq, img))
    msgs = sub.drain()
    assert isinstance(msgs[0], Empty)
    assert sum(isinstance(m, Frame) for m in msgs) == FRAME_QUEUE_BOUND


# --- introspection -----------------------------------------------------------------

def test_introspection_dump():
    bus = Bus()
    bus.subscribe("cmd_vel")
    bus.subscribe("cmd_vel")
    bus.publish("cmd_vel", Twist(0.0, TwistCommand()))
    table = json.loads(bus.introspect())
    assert table["cmd_vel"] == {
        "mode": "realtime",
        "subscribers": 2,
        "messages": 1,
    }
