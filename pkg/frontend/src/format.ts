/**
 * Number formatting for the report view. The evaluate endpoint already
 * ships a `cell` string; these helpers exist for score pairs and for
 * asserting the convention in tests. No score math happens here.
 */

/** "73.6 → 83.5 (+9.9)" from AUROC fractions; delta from the printed values. */
export function formatCell(before: number, after: number): string {
  const b = Number((before * 100).toFixed(1));
  const a = Number((after * 100).toFixed(1));
  const delta = a - b;
  const sign = delta >= 0 ? '+' : '-';
  return `${b.toFixed(1)} → ${a.toFixed(1)} (${sign}${Math.abs(delta).toFixed(1)})`;
}

/** Raw anomaly scores keep more precision; they are unbounded, not percentages. */
export function formatScorePair(before: number, after: number): string {
  return `${before.toFixed(4)} → ${after.toFixed(4)}`;
}

export function isImprovement(delta: number): boolean {
  return delta > 0;
}
