/** Session state for the triage workflow: queue, focus, image window, labels.
 *
 * All mutation goes through methods so the invariants hold: the image window
 * stays inside [0, n - k], labels count as saved only after the server
 * acknowledged the POST, and a failed POST leaves the queue position alone.
 */

import type { TriageApi } from './api.js';
import type { ImagesPerView, SeriesDetail, SeriesSummary } from './types.js';
import { IMAGES_PER_VIEW } from './types.js';

export interface PendingLabel {
  seriesId: string;
  label: 0 | 1;
  message: string;
}

export class TriageSession {
  queue: SeriesSummary[] = [];
  queuePosition = -1;
  detail: SeriesDetail | null = null;
  windowStart = 0;
  imagesPerView: ImagesPerView = 3;
  pending: PendingLabel | null = null;
  error: string | null = null;
  /** labels acknowledged by the server during this session */
  saved = new Map<string, 0 | 1>();
  private undoStack: string[] = [];

  constructor(
    private readonly api: TriageApi,
    readonly annotator: string,
  ) {}

  get focusedId(): string | null {
    return this.detail?.id ?? null;
  }

  isLabeled(summary: SeriesSummary): boolean {
    return summary.labeled || this.saved.has(summary.id);
  }

  /** Load the worklist (change score descending) and focus the first unlabeled item. */
  async load(): Promise<void> {
    try {
      const response = await this.api.listSeries();
      this.queue = response.items;
      this.error = null;
    } catch (err) {
      this.error = `service unreachable: ${String(err)}`;
      return;
    }
    const first = this.queue.findIndex((s) => !this.isLabeled(s));
    await this.focusIndex(first >= 0 ? first : this.queue.length > 0 ? 0 : -1);
  }

  async focusIndex(position: number): Promise<void> {
    if (position < 0 || position >= this.queue.length) {
      this.detail = null;
      this.queuePosition = -1;
      return;
    }
    this.queuePosition = position;
    try {
      this.detail = await this.api.getSeries(this.queue[position].id);
      this.error = null;
    } catch (err) {
      this.detail = null;
      this.error = `series unavailable: ${String(err)}`;
      return;
    }
    this.windowStart = 0;
  }

  async focusNext(): Promise<void> {
    if (this.queuePosition + 1 < this.queue.length) {
      await this.focusIndex(this.queuePosition + 1);
    }
  }

  async focusPrevious(): Promise<void> {
    if (this.queuePosition > 0) {
      await this.focusIndex(this.queuePosition - 1);
    }
  }

  private maxWindowStart(): number {
    const n = this.detail?.n ?? 0;
    return Math.max(0, n - this.imagesPerView);
  }

  /** Move the visible image window, clamped to the series bounds. */
  shiftWindow(delta: number): void {
    this.windowStart = Math.min(Math.max(0, this.windowStart + delta), this.maxWindowStart());
  }

  setImagesPerView(k: ImagesPerView): void {
    this.imagesPerView = k;
    this.windowStart = Math.min(this.windowStart, this.maxWindowStart());
  }

  cycleImagesPerView(): void {
    const at = IMAGES_PER_VIEW.indexOf(this.imagesPerView);
    this.setImagesPerView(IMAGES_PER_VIEW[(at + 1) % IMAGES_PER_VIEW.length]);
  }

  visibleIndices(): number[] {
    const n = this.detail?.n ?? 0;
    const count = Math.min(this.imagesPerView, n);
    return Array.from({ length: count }, (_, i) => this.windowStart + i);
  }

  /**
   * POST a label for the focused series. On acknowledgment the label is
   * recorded and focus advances to the next unlabeled item; on failure the
   * label stays pending and the position does not move.
   */
  async label(value: 0 | 1): Promise<boolean> {
    const id = this.focusedId;
    if (id === null) return false;
    try {
      const record = await this.api.postLabel(id, value, this.annotator);
      this.saved.set(record.target_id, record.label);
      this.pending = null;
      this.error = null;
      this.undoStack.push(id);
      await this.advancePastLabeled();
      return true;
    } catch (err) {
      this.pending = { seriesId: id, label: value, message: String(err) };
      return false;
    }
  }

  async retryPending(): Promise<boolean> {
    if (!this.pending) return false;
    const { seriesId, label } = this.pending;
    if (this.focusedId !== seriesId) return false;
    this.pending = null;
    const saved = await this.label(label);
    return saved;
  }

  private async advancePastLabeled(): Promise<void> {
    for (let i = this.queuePosition + 1; i < this.queue.length; i++) {
      if (!this.isLabeled(this.queue[i])) {
        await this.focusIndex(i);
        return;
      }
    }
    // nothing unlabeled ahead; stay on the current item
  }

  /** Reopen the most recently labeled series; its label stays editable. */
  async undo(): Promise<void> {
    const last = this.undoStack.pop();
    if (last === undefined) return;
    const position = this.queue.findIndex((s) => s.id === last);
    if (position >= 0) {
      await this.focusIndex(position);
    }
  }
}
