/** Dashboard rendering and event wiring.
 *
 * One card per chosen pair: reference and target image side by side, the
 * challenge score and category, a textarea for the modification text, and
 * a submit button that is disabled while the trimmed text is empty.  A
 * banner appears while submissions are queued waiting for the network.
 */

import { AnnotationOutbox, ApiClient, NetworkDown, ServerRejection } from './api.js';
import { isSubmittable, RoundStore } from './state.js';
import type { PairCard } from './types.js';

export interface AppOptions {
  annotator?: string;
  retryIntervalMs?: number;
}

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

export class AnnotationApp {
  readonly store: RoundStore;
  readonly outbox: AnnotationOutbox;
  private root: HTMLElement;
  private annotator: string;
  private retryTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    root: HTMLElement,
    private api: ApiClient,
    store: RoundStore,
    options: AppOptions = {},
  ) {
    this.root = root;
    this.store = store;
    this.outbox = new AnnotationOutbox(api);
    this.annotator = options.annotator ?? 'anonymous';
    this.outbox.onChange(() => this.renderBanner());
    const interval = options.retryIntervalMs ?? 5000;
    this.retryTimer = setInterval(() => void this.retryQueued(), interval);
  }

  dispose(): void {
    if (this.retryTimer !== null) clearInterval(this.retryTimer);
  }

  async start(): Promise<void> {
    try {
      await this.store.sync();
    } catch (err) {
      this.renderError(err);
      return;
    }
    this.render();
  }

  private async retryQueued(): Promise<void> {
    if (this.outbox.pendingCount === 0) return;
    const delivered = await this.outbox.flush();
    if (delivered.length > 0) {
      for (const record of delivered) this.store.clearDraft(record.pair_id);
      await this.refresh();
    }
  }

  private async refresh(): Promise<void> {
    try {
      await this.store.sync();
      this.render();
    } catch (err) {
      if (!(err instanceof NetworkDown)) this.renderError(err);
      this.renderBanner();
    }
  }

  private renderError(err: unknown): void {
    this.root.textContent = '';
    const box = el('div', 'error-page');
    box.appendChild(el('h2', undefined, 'Cannot load round'));
    const message =
      err instanceof ServerRejection
        ? `${err.code}: ${err.message}`
        : err instanceof NetworkDown
          ? 'Network unreachable; check that the annotation service is running.'
          : String(err);
    box.appendChild(el('p', 'error-message', message));
    this.root.appendChild(box);
  }

  private renderBanner(): void {
    const banner = this.root.querySelector('.retry-banner') as HTMLElement | null;
    if (!banner) return;
    const pending = this.outbox.pendingCount;
    banner.hidden = pending === 0;
    banner.textContent =
      pending === 0 ? '' : `${pending} annotation(s) queued, retrying... your text is safe.`;
  }

  render(): void {
    this.root.textContent = '';
    const { annotated, total } = this.store.progress;

    const header = el('header', 'dashboard-header');
    header.appendChild(el('h1', undefined, `Round ${this.store.roundId}`));
    const progress = el('span', 'progress-counter', `${annotated}/${total} annotated`);
    progress.setAttribute('data-testid', 'progress');
    header.appendChild(progress);

    const exportBtn = el('button', 'export-button', this.store.exported ? 'Exported' : 'Export');
    exportBtn.setAttribute('data-testid', 'export');
    exportBtn.disabled = !this.store.exportEnabled || this.store.exported;
    exportBtn.addEventListener('click', () => void this.onExport(exportBtn));
    header.appendChild(exportBtn);
    this.root.appendChild(header);

    const banner = el('div', 'retry-banner');
    banner.hidden = true;
    this.root.appendChild(banner);
    this.renderBanner();

    const list = el('div', 'card-list');
    for (const card of this.store.cards()) {
      list.appendChild(this.renderCard(card));
    }
    this.root.appendChild(list);
  }

  private renderCard(card: PairCard): HTMLElement {
    const wrap = el('section', `pair-card ${card.status}`);
    wrap.setAttribute('data-pair-id', card.pairId);

    const images = el('div', 'pair-images');
    const ref = el('img', 'ref-image');
    ref.src = card.refUrl;
    ref.alt = `reference image for ${card.pairId}`;
    const tgt = el('img', 'tgt-image');
    tgt.src = card.tgtUrl;
    tgt.alt = `target image for ${card.pairId}`;
    images.append(ref, tgt);
    wrap.appendChild(images);

    const meta = el('div', 'pair-meta');
    meta.appendChild(el('span', 'pair-id', card.pairId));
    if (card.score !== null) {
      meta.appendChild(el('span', 'pair-score', `score ${card.score.toFixed(4)}`));
    }
    if (card.category !== null) {
      meta.appendChild(el('span', 'pair-category', card.category));
    }
    meta.appendChild(el('span', 'pair-status', card.status));
    wrap.appendChild(meta);

    const textarea = el('textarea', 'annotation-input') as HTMLTextAreaElement;
    textarea.placeholder = 'Describe how the reference should change to become the target';
    textarea.value = this.store.getDraft(card.pairId) || card.annotationText || '';
    wrap.appendChild(textarea);

    const controls = el('div', 'card-controls');
    const submit = el(
      'button',
      'submit-button',
      card.status === 'annotated' ? 'Revise' : 'Submit',
    ) as HTMLButtonElement;
    submit.disabled = !isSubmittable(textarea.value) || this.store.exported;
    const inlineError = el('span', 'inline-error');
    controls.append(submit, inlineError);
    wrap.appendChild(controls);

    textarea.addEventListener('input', () => {
      this.store.setDraft(card.pairId, textarea.value);
      submit.disabled = !isSubmittable(textarea.value) || this.store.exported;
    });
    submit.addEventListener('click', () =>
      void this.onSubmit(card.pairId, textarea, submit, inlineError),
    );
    return wrap;
  }

  private async onSubmit(
    pairId: string,
    textarea: HTMLTextAreaElement,
    submit: HTMLButtonElement,
    inlineError: HTMLElement,
  ): Promise<void> {
    const text = textarea.value;
    if (!isSubmittable(text)) return;
    inlineError.textContent = '';
    submit.disabled = true;
    try {
      const record = await this.outbox.submit(this.store.roundId, pairId, text, this.annotator);
      if (record === null) {
        // queued: banner is showing, draft stays until the ack arrives
        submit.disabled = false;
        return;
      }
      this.store.clearDraft(pairId);
      await this.refresh();
    } catch (err) {
      submit.disabled = false;
      inlineError.textContent =
        err instanceof ServerRejection ? `${err.code}: ${err.message}` : String(err);
    }
  }

  private async onExport(button: HTMLButtonElement): Promise<void> {
    button.disabled = true;
    try {
      await this.api.exportRound(this.store.roundId);
      await this.refresh();
    } catch (err) {
      button.disabled = false;
      this.renderError(err);
    }
  }
}

export function mountApp(
  root: HTMLElement,
  api: ApiClient,
  store: RoundStore,
  options: AppOptions = {},
): AnnotationApp {
  return new AnnotationApp(root, api, store, options);
}
