"""A serial-line session bridged onto the bus: ASCII lines in, frames out,
and frames seen by the gateway's node come back as ASCII lines.
"""

from vcanlab import (Bus, BusConfig, GatewaySession, ScheduleEntry,
                     SensorConfig, SensorReading, build_reading_frame)

bus = Bus(BusConfig())
session = GatewaySession(bus.attach_node("gateway"))
bus.attach_node("sensor")

print("serial -> bus: each line answered with CR (accept) or BEL (reject)")
for line in (b"t1232ABCD\r", b"r1234\r", b"garbage\r"):
    reply = session.pump(line)
    print(f"  {line!r} -> {reply!r}")

bus.run([], 2_000)  # let the submitted frames go out on the wire

print("bus -> serial: a sensor reading arrives as a formatted line")
reading_frame = build_reading_frame(SensorConfig(), SensorReading(512, 2002))
bus.run([ScheduleEntry(0, "sensor", reading_frame)], 4_000)
print(f"  {session.pump()!r}")
