/** DOM rendering and event wiring for the triage session. */

import type { TriageApi } from './api.js';
import { actionForKey, applyAction } from './keyboard.js';
import { decodePpm } from './ppm.js';
import { sparklineSvg } from './sparkline.js';
import { TriageSession } from './state.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class TriageApp {
  private session: TriageSession;

  constructor(
    private readonly api: TriageApi,
    private readonly root: HTMLElement,
    annotator: string,
  ) {
    this.session = new TriageSession(api, annotator);
  }

  async start(): Promise<void> {
    window.addEventListener('keydown', (event) => void this.onKey(event));
    await this.session.load();
    this.render();
  }

  private async onKey(event: KeyboardEvent): Promise<void> {
    if (event.target instanceof HTMLInputElement) return;
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    await applyAction(this.session, action);
    this.render();
  }

  private render(): void {
    this.root.replaceChildren();
    if (this.session.error && this.session.queue.length === 0) {
      this.renderErrorBanner();
      return;
    }
    const layout = el('div', 'layout');
    layout.append(this.renderQueue(), this.renderDetail());
    this.root.append(layout);
  }

  private renderErrorBanner(): void {
    const banner = el('div', 'banner error');
    banner.append(el('p', '', this.session.error ?? 'unknown error'));
    const retry = el('button', '', 'Retry');
    retry.onclick = () => {
      void this.session.load().then(() => this.render());
    };
    banner.append(retry);
    this.root.append(banner);
  }

  private renderQueue(): HTMLElement {
    const panel = el('aside', 'queue');
    panel.append(el('h2', '', 'Worklist'));
    if (this.session.queue.length === 0) {
      panel.append(el('p', 'empty', 'No series loaded. Generate and score a dataset first.'));
      return panel;
    }
    const list = el('ul');
    this.session.queue.forEach((summary, position) => {
      const item = el('li', position === this.session.queuePosition ? 'focused' : '');
      const score =
        summary.change_score === null ? 'n/a' : summary.change_score.toFixed(3);
      item.append(el('span', 'sid', summary.id), el('span', 'score', score));
      if (this.session.isLabeled(summary)) {
        const value = this.session.saved.get(summary.id);
        item.append(el('span', 'badge', value === undefined ? 'labeled' : `label ${value}`));
      }
      item.onclick = () => {
        void this.session.focusIndex(position).then(() => this.render());
      };
      list.append(item);
    });
    panel.append(list);
    return panel;
  }

  private renderDetail(): HTMLElement {
    const panel = el('section', 'detail');
    const detail = this.session.detail;
    if (!detail) {
      if (this.session.error) {
        panel.append(el('div', 'banner error', this.session.error));
      }
      panel.append(el('p', 'empty', 'Nothing focused.'));
      return panel;
    }
    const head = el('div', 'detail-head');
    head.append(el('h2', '', detail.id));
    const score =
      detail.change_score === null ? 'n/a' : detail.change_score.toFixed(4);
    head.append(
      el('span', 'meta', `${detail.measure ?? 'score'} ${score}`),
      el('span', 'meta', detail.pivot_month === null ? '' : `pivot month ${detail.pivot_month}`),
      el('span', 'meta', `view ${this.session.imagesPerView} (v cycles)`),
    );
    panel.append(head);

    if (this.session.pending) {
      const pending = el('div', 'banner pending');
      pending.append(
        el('span', '', `label ${this.session.pending.label} not saved: ${this.session.pending.message}`),
      );
      const retry = el('button', '', 'Retry (r)');
      retry.onclick = () => {
        void this.session.retryPending().then(() => this.render());
      };
      pending.append(retry);
      panel.append(pending);
    }

    const strip = el('div', 'strip');
    for (const index of this.session.visibleIndices()) {
      const cell = el('figure', 'frame');
      const canvas = el('canvas');
      void this.drawFrame(canvas, detail.id, index);
      cell.append(canvas, el('figcaption', '', `month ${detail.timestamps[index]}`));
      strip.append(cell);
    }
    panel.append(strip);

    const spark = el('div', 'spark-holder');
    spark.innerHTML = sparklineSvg({
      points: detail.scores,
      pivotMonth: detail.pivot_month,
    });
    panel.append(spark);
    panel.append(
      el('p', 'hint', 'keys: 1 change, 0 no change, u undo, arrows navigate, v view size'),
    );
    return panel;
  }

  private async drawFrame(canvas: HTMLCanvasElement, id: string, index: number): Promise<void> {
    try {
      const response = await fetch(this.api.imageUrl(id, index));
      if (!response.ok) return;
      const decoded = decodePpm(await response.arrayBuffer());
      canvas.width = decoded.width;
      canvas.height = decoded.height;
      const ctx = canvas.getContext('2d');
      if (!ctx) return;
      const imageData = ctx.createImageData(decoded.width, decoded.height);
      imageData.data.set(decoded.rgba);
      ctx.putImageData(imageData, 0, 0);
    } catch {
      canvas.classList.add('broken');
    }
  }
}
