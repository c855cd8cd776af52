"""Gantt-style SVG rendering of a bus schedule: one row per bus, time on the x axis."""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET

from .io import write_atomic
from .model import ProblemInstance, Schedule

PALETTE = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
           "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"]
PX_PER_MIN = 1.2
ROW_H = 18
LEFT = 70
TOP = 30
LEGEND_H = 40


def _hhmm(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"


def render_gantt(schedule: Schedule, instance: ProblemInstance, path=None, title: str = "") -> str:
    line_ids = [ln.id for ln in instance.lines]
    known = set(line_ids)
    for t in schedule.trips:
        if not 0 <= t.bus_id < instance.fleet_size:
            raise ValueError(f"schedule references bus {t.bus_id}, fleet has {instance.fleet_size}")
        if t.kind == "service" and t.line_id not in known:
            raise ValueError(f"schedule references unknown line {t.line_id}")
    colour = {lid: PALETTE[i % len(PALETTE)] for i, lid in enumerate(line_ids)}

    deps = [d for tt in instance.timetables for d in tt.departures]
    lo = min([t.depart_minute for t in schedule.trips] + deps, default=0)
    hi = max([t.arrive_minute for t in schedule.trips] + deps, default=60)
    t0 = (lo // 60) * 60
    t1 = max(math.ceil(hi / 60) * 60, t0 + 60)
    rows = sorted({t.bus_id for t in schedule.trips})
    width = LEFT + (t1 - t0) * PX_PER_MIN + 20
    plot_h = max(len(rows), 1) * ROW_H
    height = TOP + plot_h + 30 + LEGEND_H
    x = lambda m: LEFT + (m - t0) * PX_PER_MIN

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=f"{width:.0f}",
                     height=f"{height:.0f}", viewBox=f"0 0 {width:.0f} {height:.0f}")
    defs = ET.SubElement(svg, "defs")
    pat = ET.SubElement(defs, "pattern", id="hatch", patternUnits="userSpaceOnUse",
                        width="6", height="6", patternTransform="rotate(45)")
    ET.SubElement(pat, "rect", width="6", height="6", fill="#ffffff")
    ET.SubElement(pat, "line", x1="0", y1="0", x2="0", y2="6", stroke="#555555", **{"stroke-width": "2"})
    ET.SubElement(svg, "rect", width="100%", height="100%", fill="#ffffff")
    if title:
        ET.SubElement(svg, "text", x=str(LEFT), y="18", **{"font-size": "13", "font-family": "sans-serif"}).text = title

    axis = ET.SubElement(svg, "g", {"class": "axis", "font-size": "10", "font-family": "sans-serif"})
    base = TOP + plot_h
    ET.SubElement(axis, "line", x1=str(LEFT), y1=str(base), x2=f"{x(t1):.1f}", y2=str(base), stroke="#000000")
    ET.SubElement(axis, "line", x1=str(LEFT), y1=str(TOP), x2=str(LEFT), y2=str(base), stroke="#000000")
    for m in range(t0, t1 + 1, 60):
        ET.SubElement(axis, "line", x1=f"{x(m):.1f}", y1=str(TOP), x2=f"{x(m):.1f}", y2=str(base + 4),
                      stroke="#dddddd")
        ET.SubElement(axis, "text", x=f"{x(m):.1f}", y=str(base + 16), **{"text-anchor": "middle"}).text = _hhmm(m)
    for r, bus in enumerate(rows):
        ET.SubElement(axis, "text", x=str(LEFT - 6), y=str(TOP + r * ROW_H + ROW_H * 0.7),
                      **{"text-anchor": "end"}).text = f"bus {bus}"

    trips = ET.SubElement(svg, "g", {"class": "trips"})
    row_of = {b: i for i, b in enumerate(rows)}
    for t in sorted(schedule.trips, key=lambda t: (t.bus_id, t.depart_minute)):
        y = TOP + row_of[t.bus_id] * ROW_H + 2
        fill = "url(#hatch)" if t.kind == "deadhead" else colour[t.line_id]
        rect = ET.SubElement(trips, "rect", {"class": f"trip {t.kind}"}, x=f"{x(t.depart_minute):.1f}",
                             y=str(y), width=f"{t.duration * PX_PER_MIN:.1f}", height=str(ROW_H - 4),
                             fill=fill, stroke="#333333", **{"stroke-width": "0.5"})
        label = f"{t.kind} CP{t.from_cp}->CP{t.to_cp} {_hhmm(t.depart_minute)}-{_hhmm(t.arrive_minute)}"
        ET.SubElement(rect, "title").text = label

    legend = ET.SubElement(svg, "g", {"class": "legend", "font-size": "10", "font-family": "sans-serif"})
    ly = base + 30
    items = [(f"line {lid}", colour[lid]) for lid in line_ids] + [("deadhead", "url(#hatch)")]
    for i, (name, fill) in enumerate(items):
        lx = LEFT + i * 80
        ET.SubElement(legend, "rect", {"class": "swatch"}, x=str(lx), y=str(ly), width="12", height="10",
                      fill=fill, stroke="#333333")
        ET.SubElement(legend, "text", x=str(lx + 16), y=str(ly + 9)).text = name

    text = ET.tostring(svg, encoding="unicode")
    doc = '<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n"
    if path is not None:
        write_atomic(path, doc)
    return doc
