/**
 * Client-side quad validity check. Mirrors the server rule exactly: a
 * quad needs four points, every three of them must span a triangle
 * larger than the collinearity floor, and opposite edges must not
 * cross. Running the same test before submit lets the annotator warn
 * and highlight offenders without a round trip.
 */

import type { Point } from './api.js';

export const MIN_TRIANGLE_AREA = 1e-6; // px^2, same floor the server applies

export type QuadCheck =
  | { ok: true }
  | { ok: false; reason: string; offenders: number[] };

function triangleArea(a: Point, b: Point, c: Point): number {
  return 0.5 * Math.abs(
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

function cross(o: Point, a: Point, b: Point): number {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/** Proper intersection of open segments; shared endpoints do not count. */
function segmentsIntersect(p1: Point, p2: Point, q1: Point, q2: Point): boolean {
  const d1 = cross(p1, p2, q1);
  const d2 = cross(p1, p2, q2);
  const d3 = cross(q1, q2, p1);
  const d4 = cross(q1, q2, p2);
  return (d1 > 0) !== (d2 > 0) && (d3 > 0) !== (d4 > 0);
}

export function checkQuad(points: Point[]): QuadCheck {
  if (points.length !== 4) {
    return {
      ok: false,
      reason: `quad needs 4 points, got ${points.length}`,
      offenders: points.map((_, i) => i),
    };
  }
  for (let skip = 0; skip < 4; skip++) {
    const kept = [0, 1, 2, 3].filter((i) => i !== skip);
    const [a, b, c] = kept.map((i) => points[i]);
    if (triangleArea(a, b, c) <= MIN_TRIANGLE_AREA) {
      return {
        ok: false,
        reason: `points ${kept.map((i) => i + 1).join(', ')} are collinear`,
        offenders: kept,
      };
    }
  }
  if (segmentsIntersect(points[0], points[1], points[2], points[3])
      || segmentsIntersect(points[1], points[2], points[3], points[0])) {
    return {
      ok: false,
      reason: 'the polygon crosses itself',
      offenders: [0, 1, 2, 3],
    };
  }
  return { ok: true };
}
