import { ApiError, Client } from './api.js';
import { isPermutation, moveItem, parseRankText } from './ranking.js';
import { animateTrajectory, renderCard, stopAllAnimations } from './render.js';
import type { FeedbackKind, FinalPayload, RoundPayload } from './types.js';

/** Single-session app: create or resume a session, rank rounds until the
 * polish stage is accepted, then show the selected path. All session state
 * lives server-side; reloading the page resumes at the current round via
 * the #session=<id> hash. */
export class App {
  client: Client;
  root: HTMLElement;
  doc: Document;
  sessionId: string | null = null;
  round: RoundPayload | null = null;
  order: number[] = [];
  selected: number | null = null;
  pending: { kind: FeedbackKind; ranking: number[] } | null = null;

  constructor(root: HTMLElement, client: Client) {
    this.root = root;
    this.client = client;
    this.doc = root.ownerDocument;
  }

  async start(): Promise<void> {
    const hash = this.doc.defaultView?.location.hash ?? '';
    const match = hash.match(/session=([a-z0-9-]+)/i);
    if (match) {
      await this.resume(match[1]!);
    } else {
      this.renderCreate();
    }
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text = '',
  ): HTMLElementTagNameMap[K] {
    const node = this.doc.createElement(tag);
    for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
    if (text) node.textContent = text;
    return node;
  }

  private setHash(value: string): void {
    const win = this.doc.defaultView;
    if (win?.history?.replaceState) {
      win.history.replaceState(null, '', value ? `#session=${value}` : '#');
    }
  }

  // ---- views ----

  renderCreate(): void {
    stopAllAnimations();
    this.root.innerHTML = '';
    const view = this.el('div', { id: 'create-view' });
    view.append(this.el('h2', {}, 'Start a ranking session'));

    const purpose = this.el('select', { id: 'purpose' });
    for (const p of ['representative', 'personalize', 'style_aware']) {
      purpose.append(this.el('option', { value: p }, p));
    }
    const condition = this.el('input', { id: 'condition', placeholder: 'describe the motion' });
    const storeId = this.el('input', { id: 'store-id', placeholder: 'store id (optional)' });
    const seed = this.el('input', { id: 'seed', type: 'number', placeholder: 'seed (optional)' });
    const createBtn = this.el('button', { id: 'create-btn' }, 'Create session');
    createBtn.addEventListener('click', () => {
      void this.create(
        purpose.value as 'representative' | 'personalize' | 'style_aware',
        condition.value,
        storeId.value || undefined,
        seed.value === '' ? undefined : Number(seed.value),
      );
    });

    const resumeId = this.el('input', { id: 'resume-id', placeholder: 'session id' });
    const resumeBtn = this.el('button', { id: 'resume-btn' }, 'Resume');
    resumeBtn.addEventListener('click', () => void this.resume(resumeId.value));

    view.append(
      this.labelled('What to optimize', purpose),
      this.labelled('Condition text', condition),
      this.labelled('Prior store', storeId),
      this.labelled('Seed', seed),
      createBtn,
      this.el('hr'),
      this.labelled('Resume a session', resumeId),
      resumeBtn,
    );
    this.root.append(view, this.banner());
  }

  private labelled(text: string, control: HTMLElement): HTMLElement {
    const row = this.el('div', { class: 'form-row' });
    row.append(this.el('label', {}, text), control);
    return row;
  }

  private banner(): HTMLElement {
    const banner = this.el('div', { id: 'error-banner', hidden: 'hidden' });
    banner.append(this.el('span', { id: 'error-message' }));
    return banner;
  }

  showError(message: string, retry?: () => void): void {
    const banner = this.root.querySelector('#error-banner') as HTMLElement | null;
    if (!banner) return;
    banner.hidden = false;
    const msg = banner.querySelector('#error-message') as HTMLElement;
    msg.textContent = message;
    banner.querySelector('#retry-btn')?.remove();
    if (retry) {
      const btn = this.el('button', { id: 'retry-btn' }, 'Retry');
      btn.addEventListener('click', () => {
        banner.hidden = true;
        retry();
      });
      banner.append(btn);
    }
  }

  clearError(): void {
    const banner = this.root.querySelector('#error-banner') as HTMLElement | null;
    if (banner) banner.hidden = true;
  }

  async create(
    purpose: 'representative' | 'personalize' | 'style_aware',
    conditionText: string,
    storeId?: string,
    seed?: number,
  ): Promise<void> {
    try {
      const res = await this.client.createSession({
        purpose,
        condition_text: conditionText,
        mode: 'human',
        store_id: storeId,
        seed,
      });
      this.sessionId = res.id;
      this.round = res.round;
      this.setHash(res.id);
      this.renderRound();
    } catch (err) {
      this.handleFailure(err, () => void this.create(purpose, conditionText, storeId, seed));
    }
  }

  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    this.setHash(sessionId);
    await this.loadRound();
  }

  async loadRound(): Promise<void> {
    if (!this.sessionId) return;
    try {
      this.round = await this.client.getRound(this.sessionId);
      this.renderRound();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        const body = err.body as { final?: FinalPayload } | null;
        if (body?.final) {
          this.renderFinal(body.final);
          return;
        }
      }
      this.handleFailure(err, () => void this.loadRound());
    }
  }

  renderRound(): void {
    const round = this.round;
    if (!round) return;
    stopAllAnimations();
    this.order = round.candidates.map((_, i) => i);
    this.selected = null;
    this.root.innerHTML = '';

    const view = this.el('div', { id: 'session-view' });
    view.append(
      this.el(
        'h2',
        { id: 'round-header' },
        `Round ${round.round} — ${round.stage === 'stage1' ? 'exploration' : 'polish'}`,
      ),
      this.el('div', { id: 'session-id', 'data-session': round.session_id }, `session ${round.session_id}`),
    );

    const cards = this.el('div', { id: 'cards' });
    round.candidates.forEach((traj, i) => {
      cards.append(renderCard(this.doc, traj, i, (idx) => this.selectCard(idx)));
    });
    view.append(cards);
    view.append(this.buildControls(round));
    this.root.append(view, this.banner());
  }

  private selectCard(index: number): void {
    this.selected = index;
    this.root.querySelectorAll('.card').forEach((card) => {
      card.classList.toggle('selected', Number((card as HTMLElement).dataset.index) === index);
    });
    for (const id of ['pick-best', 'accept-exit']) {
      const btn = this.root.querySelector(`#${id}`) as HTMLButtonElement | null;
      if (btn) btn.disabled = false;
    }
  }

  private buildControls(round: RoundPayload): HTMLElement {
    const controls = this.el('div', { id: 'controls' });
    if (round.allowed_feedback.includes('full_ranking')) {
      controls.append(this.buildRankControl(round.m));
    }
    if (round.allowed_feedback.includes('best_only')) {
      const pick = this.el('button', { id: 'pick-best' }, 'Pick best only');
      pick.disabled = true;
      pick.addEventListener('click', () => {
        if (this.selected !== null) void this.submit('best_only', [this.selected]);
      });
      controls.append(pick);
    }
    if (round.allowed_feedback.includes('accept_and_exit')) {
      const accept = this.el('button', { id: 'accept-exit' }, 'Accept & exit');
      accept.disabled = true;
      accept.addEventListener('click', () => {
        if (this.selected !== null) void this.submit('accept_and_exit', [this.selected]);
      });
      controls.append(accept);
    }
    return controls;
  }

  private buildRankControl(m: number): HTMLElement {
    const wrap = this.el('div', { id: 'rank-control' });
    wrap.append(this.el('p', {}, 'Order the candidates from best to worst:'));
    const list = this.el('ol', { id: 'rank-list' });
    wrap.append(list);

    const text = this.el('input', {
      id: 'rank-text',
      placeholder: 'or type ids best to worst, e.g. 3 1 4 2',
    });
    const textError = this.el('span', { id: 'rank-error' });
    const submit = this.el('button', { id: 'submit-ranking' }, 'Submit ranking');

    const redraw = () => {
      list.innerHTML = '';
      this.order.forEach((candidate, pos) => {
        const li = this.el('li', { 'data-candidate': String(candidate), draggable: 'true' });
        li.append(this.el('span', { class: 'rank-label' }, `candidate ${candidate + 1}`));
        const up = this.el('button', { class: 'move-up' }, '▲');
        const down = this.el('button', { class: 'move-down' }, '▼');
        up.addEventListener('click', () => {
          this.order = moveItem(this.order, pos, -1);
          redraw();
        });
        down.addEventListener('click', () => {
          this.order = moveItem(this.order, pos, +1);
          redraw();
        });
        li.addEventListener('dragstart', (ev: DragEvent) => {
          ev.dataTransfer?.setData('text/plain', String(pos));
        });
        li.addEventListener('dragover', (ev: Event) => ev.preventDefault());
        li.addEventListener('drop', (ev: DragEvent) => {
          ev.preventDefault();
          const from = Number(ev.dataTransfer?.getData('text/plain'));
          if (Number.isInteger(from)) {
            this.order = moveItem(this.order, from, pos - from);
            redraw();
          }
        });
        li.append(up, down);
        list.append(li);
      });
    };
    redraw();

    const validate = () => {
      if (text.value.trim() === '') {
        textError.textContent = '';
        submit.disabled = !isPermutation(this.order, m);
        return;
      }
      const parsed = parseRankText(text.value, m);
      textError.textContent = parsed.error;
      submit.disabled = !parsed.ok;
    };
    text.addEventListener('input', validate);
    validate();

    submit.addEventListener('click', () => {
      const ranking =
        text.value.trim() === '' ? this.order.slice() : parseRankText(text.value, m).ranking;
      if (isPermutation(ranking, m)) void this.submit('full_ranking', ranking);
    });

    wrap.append(text, textError, submit);
    return wrap;
  }

  async submit(kind: FeedbackKind, ranking: number[]): Promise<void> {
    if (!this.sessionId || !this.round) return;
    this.pending = { kind, ranking };
    this.clearError();
    try {
      const res = await this.client.submitFeedback(this.sessionId, this.round.round, kind, ranking);
      this.pending = null;
      if (res.status === 'finished' && res.final) {
        this.renderFinal(res.final);
      } else if (res.round) {
        this.round = res.round;
        this.renderRound();
      }
    } catch (err) {
      this.handleFailure(err, () => {
        const p = this.pending;
        if (p) void this.submit(p.kind, p.ranking);
      });
    }
  }

  private handleFailure(err: unknown, retry: () => void): void {
    if (err instanceof ApiError) {
      if (err.status === 409) {
        // Stale round: refresh to the server's view of the session.
        void this.loadRound();
        return;
      }
      this.showError(err.message);
      return;
    }
    // Network failure: nothing was lost, offer a retry.
    this.showError('network error — the session is safe on the server', retry);
  }

  renderFinal(final: FinalPayload): void {
    stopAllAnimations();
    this.root.innerHTML = '';
    const view = this.el('div', { id: 'final-view' });
    view.append(this.el('h2', {}, 'Session finished'));
    const canvas = this.el('canvas', { id: 'final-canvas' });
    view.append(canvas);
    animateTrajectory(canvas, final.trajectory);
    if (final.saved_entry_id) {
      view.append(
        this.el('p', { id: 'saved-entry', 'data-entry': final.saved_entry_id },
          `saved to store entry ${final.saved_entry_id}`),
      );
    }
    const again = this.el('button', { id: 'new-session' }, 'Start another session');
    again.addEventListener('click', () => {
      this.sessionId = null;
      this.round = null;
      this.setHash('');
      this.renderCreate();
    });
    view.append(again);
    this.root.append(view, this.banner());
  }
}

export function mountApp(root: HTMLElement, base?: string): App {
  const win = root.ownerDocument.defaultView as (Window & { RANKOPT_BASE?: string }) | null;
  const client = new Client(base ?? win?.RANKOPT_BASE ?? '');
  const app = new App(root, client);
  void app.start();
  return app;
}
