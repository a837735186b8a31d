/** Pure input-validation logic for the ranking controls.
 *
 * Candidates are displayed 1-based; everything returned to the API is
 * 0-based. A stage-1 submission must be a full permutation of all m
 * candidates (best first); best-pick and accept need one valid id.
 */

export interface ParseResult {
  ok: boolean;
  ranking: number[];
  error: string;
}

export function parseRankText(text: string, m: number): ParseResult {
  const tokens = text.trim().split(/[\s,]+/).filter((t) => t.length > 0);
  if (tokens.length === 0) {
    return { ok: false, ranking: [], error: 'enter a ranking' };
  }
  const ids: number[] = [];
  for (const tok of tokens) {
    const n = Number(tok);
    if (!Number.isInteger(n)) {
      return { ok: false, ranking: [], error: `"${tok}" is not a number` };
    }
    if (n < 1 || n > m) {
      return { ok: false, ranking: [], error: `ids must be between 1 and ${m}` };
    }
    if (ids.includes(n - 1)) {
      return { ok: false, ranking: [], error: `id ${n} appears twice` };
    }
    ids.push(n - 1);
  }
  if (ids.length !== m) {
    return { ok: false, ranking: [], error: `rank all ${m} candidates (got ${ids.length})` };
  }
  return { ok: true, ranking: ids, error: '' };
}

export function isPermutation(order: number[], m: number): boolean {
  if (order.length !== m) return false;
  const seen = new Set(order);
  if (seen.size !== m) return false;
  for (const i of order) {
    if (!Number.isInteger(i) || i < 0 || i >= m) return false;
  }
  return true;
}

/** Move the element at `index` by `delta` positions, returning a new order. */
export function moveItem(order: number[], index: number, delta: number): number[] {
  const target = index + delta;
  if (target < 0 || target >= order.length) return order.slice();
  const out = order.slice();
  const [item] = out.splice(index, 1);
  out.splice(target, 0, item!);
  return out;
}
