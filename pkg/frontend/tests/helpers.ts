/** Shared helpers: round fixtures over the real API, DOM utilities. */

import { expect } from 'vitest';

export interface RoundFixture {
  roundId: string;
  pairIds: string[];
}

let counter = 0;

/** POST a fresh 2-shot round through the public API. */
export async function createRound(
  baseUrl: string,
  nPairs = 2,
  category = 'a',
): Promise<RoundFixture> {
  const roundId = `ui-round-${process.pid}-${Date.now()}-${counter++}`;
  const pairIds = Array.from({ length: nPairs }, (_, i) => `${roundId}-p${i}`);
  const pairs: Record<string, unknown> = {};
  pairIds.forEach((pid, i) => {
    pairs[pid] = {
      ref: `ref-${i}.png`,
      tgt: `tgt-${i}.png`,
      score: 1.0 + i * 0.1,
      category,
    };
  });
  const body = {
    round_id: roundId,
    config: { strategy: 'top_range_random', shots_per_category: nPairs, seed: 0 },
    categories: { [category]: { pool: pairIds, chosen: pairIds } },
    pairs,
    warnings: [],
    created_at: new Date().toISOString(),
    status: 'selected',
  };
  const resp = await fetch(`${baseUrl}/rounds`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  expect(resp.status).toBe(201);
  return { roundId, pairIds };
}

export async function waitFor(
  condition: () => boolean,
  timeoutMs = 5000,
  what = 'condition',
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (condition()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

export function typeInto(textarea: HTMLTextAreaElement, text: string): void {
  textarea.value = text;
  textarea.dispatchEvent(new Event('input', { bubbles: true }));
}

export function cardOf(root: HTMLElement, pairId: string): HTMLElement {
  const card = root.querySelector(`[data-pair-id="${pairId}"]`);
  expect(card, `card for ${pairId}`).not.toBeNull();
  return card as HTMLElement;
}

export function progressText(root: HTMLElement): string {
  return root.querySelector('[data-testid="progress"]')?.textContent ?? '';
}
