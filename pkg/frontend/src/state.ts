/** Round state mirrored from the server, plus locally drafted text.
 *
 * The server is the only source of truth for annotation status and
 * progress: every mutation is followed by a sync, and a full page reload
 * rebuilds exactly what the server reports.  The only client-side state is
 * unsubmitted draft text, kept in storage so typing survives reloads and
 * outages.
 */

import type { ApiClient } from './api.js';
import type { PairCard, PairState, RoundView } from './types.js';

export interface DraftStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** In-memory fallback when localStorage is unavailable. */
export class MemoryStorage implements DraftStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.has(key) ? (this.map.get(key) as string) : null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export function isSubmittable(text: string): boolean {
  return text.trim().length > 0;
}

export class RoundStore {
  view: RoundView | null = null;
  pairs: PairState[] = [];

  constructor(
    private api: ApiClient,
    readonly roundId: string,
    private storage: DraftStorage,
  ) {}

  private draftKey(pairId: string): string {
    return `ptge-draft:${this.roundId}:${pairId}`;
  }

  getDraft(pairId: string): string {
    return this.storage.getItem(this.draftKey(pairId)) ?? '';
  }

  setDraft(pairId: string, text: string): void {
    if (text === '') {
      this.storage.removeItem(this.draftKey(pairId));
    } else {
      this.storage.setItem(this.draftKey(pairId), text);
    }
  }

  clearDraft(pairId: string): void {
    this.storage.removeItem(this.draftKey(pairId));
  }

  /** Pull server truth; pairs arrive pending-first from the API. */
  async sync(): Promise<void> {
    this.view = await this.api.getRound(this.roundId);
    this.pairs = await this.api.getPairs(this.roundId);
  }

  get progress(): { annotated: number; total: number } {
    return this.view?.progress ?? { annotated: 0, total: 0 };
  }

  get exportEnabled(): boolean {
    const { annotated, total } = this.progress;
    return total > 0 && annotated === total;
  }

  get exported(): boolean {
    return this.view?.status === 'exported';
  }

  cards(): PairCard[] {
    return this.pairs.map((pair) => ({
      pairId: pair.pair_id,
      refUrl: pair.ref ? this.api.mediaUrl(pair.ref) : '',
      tgtUrl: pair.tgt ? this.api.mediaUrl(pair.tgt) : '',
      score: pair.score,
      category: pair.category,
      annotationText: pair.annotation?.text ?? null,
      status: pair.status,
    }));
  }
}
