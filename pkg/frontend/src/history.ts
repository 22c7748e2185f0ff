/**
 * Per-class history of normality drafts, so engineers can A/B wordings.
 * Backed by localStorage in the browser; the storage interface is injected
 * for testability.
 */

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const PREFIX = 'nandkit.history.';
const LIMIT = 20;

export class PromptHistory {
  constructor(private readonly store: KeyValueStore) {}

  private key(cls: string): string {
    return PREFIX + cls;
  }

  list(cls: string): string[] {
    const raw = this.store.getItem(this.key(cls));
    if (!raw) return [];
    try {
      const parsed = JSON.parse(raw) as unknown;
      return Array.isArray(parsed) ? parsed.filter((x): x is string => typeof x === 'string') : [];
    } catch {
      return [];
    }
  }

  /** Most recent first, deduplicated, capped. */
  add(cls: string, draft: string): string[] {
    const text = draft.trim();
    if (!text) return this.list(cls);
    const next = [text, ...this.list(cls).filter((d) => d !== text)].slice(0, LIMIT);
    this.store.setItem(this.key(cls), JSON.stringify(next));
    return next;
  }
}
