/**
 * Append-only job history in Storage. Entries are never dropped except when
 * the cap overflows (oldest first); state transitions update in place.
 */

export interface HistoryEntry {
  id: string;
  submittedAt: string; // ISO timestamp
  summary: string;
  state: string;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class JobHistory {
  constructor(
    private readonly storage: StorageLike,
    private readonly key = "makeuplab.history",
    private readonly cap = 50,
  ) {
    if (cap < 1) throw new Error(`history cap must be >= 1, got ${cap}`);
  }

  /** Newest first. Corrupt or missing storage reads as empty. */
  list(): HistoryEntry[] {
    const raw = this.storage.getItem(this.key);
    if (raw === null) return [];
    try {
      const parsed: unknown = JSON.parse(raw);
      if (!Array.isArray(parsed)) return [];
      return (parsed as HistoryEntry[]).slice().reverse();
    } catch {
      return [];
    }
  }

  /** No-op when the id is already present. */
  append(entry: HistoryEntry): void {
    const oldestFirst = this.list().reverse();
    if (oldestFirst.some((e) => e.id === entry.id)) return;
    oldestFirst.push({ ...entry });
    while (oldestFirst.length > this.cap) oldestFirst.shift();
    this.storage.setItem(this.key, JSON.stringify(oldestFirst));
  }

  setState(id: string, state: string): void {
    const oldestFirst = this.list().reverse();
    const entry = oldestFirst.find((e) => e.id === id);
    if (!entry) return;
    entry.state = state;
    this.storage.setItem(this.key, JSON.stringify(oldestFirst));
  }
}
