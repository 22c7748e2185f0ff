/** DOM wiring for the normality editor. All numbers on screen come from API
 * response fields; this file only routes them to elements. */

import { ApiClient, ApiError } from './api.js';
import { formatScorePair, isImprovement } from './format.js';
import { drawOverlay, scaleCaption } from './heatmap.js';
import { PromptHistory } from './history.js';
import {
  failPreview,
  initialState,
  resolvePreview,
  selectImage,
  setDetector,
  setDraft,
  submitPreview,
  type PreviewState,
} from './state.js';
import type { DetectorKind, EvalReportPayload, PreviewPayload } from './types.js';

const api = new ApiClient('');
const history = new PromptHistory(window.localStorage);

let state: PreviewState = initialState();
let previewAbort: AbortController | null = null;
let evalInFlight = false;

const el = {
  classSelect: byId<HTMLSelectElement>('class-select'),
  imageSelect: byId<HTMLSelectElement>('image-select'),
  detectorSelect: byId<HTMLSelectElement>('detector-select'),
  normalityInput: byId<HTMLInputElement>('normality-input'),
  previewButton: byId<HTMLButtonElement>('preview-button'),
  opacity: byId<HTMLInputElement>('opacity-slider'),
  hint: byId<HTMLDivElement>('hint'),
  error: byId<HTMLDivElement>('error-banner'),
  scores: byId<HTMLDivElement>('score-pair'),
  maps: {
    before: byId<HTMLCanvasElement>('map-before'),
    sup: byId<HTMLCanvasElement>('map-sup'),
    after: byId<HTMLCanvasElement>('map-after'),
  },
  captions: {
    before: byId<HTMLDivElement>('caption-before'),
    sup: byId<HTMLDivElement>('caption-sup'),
    after: byId<HTMLDivElement>('caption-after'),
  },
  groupSelect: byId<HTMLSelectElement>('group-select'),
  evalButton: byId<HTMLButtonElement>('eval-button'),
  reportView: byId<HTMLDivElement>('report-view'),
  historyList: byId<HTMLUListElement>('history-list'),
};

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string | null): void {
  el.error.textContent = message ?? '';
  el.error.hidden = !message;
}

function showHint(message: string | null): void {
  el.hint.textContent = message ?? '';
  el.hint.hidden = !message;
}

function renderHistory(): void {
  el.historyList.replaceChildren();
  if (!state.cls) return;
  for (const draft of history.list(state.cls)) {
    const item = document.createElement('li');
    const button = document.createElement('button');
    button.type = 'button';
    button.textContent = draft;
    button.addEventListener('click', () => {
      el.normalityInput.value = draft;
      state = setDraft(state, draft);
      void runPreview();
    });
    item.appendChild(button);
    el.historyList.appendChild(item);
  }
}

async function renderPreview(payload: PreviewPayload): Promise<void> {
  const opacity = Number(el.opacity.value) / 100;
  const baseUrl = api.imageUrl(payload.image);
  await Promise.all([
    drawOverlay(el.maps.before, baseUrl, payload.map_before.png_base64, opacity),
    drawOverlay(el.maps.sup, baseUrl, payload.map_sup.png_base64, opacity),
    drawOverlay(el.maps.after, baseUrl, payload.map_after.png_base64, opacity),
  ]);
  el.captions.before.textContent = `before, scale ${scaleCaption(payload.map_before.min, payload.map_before.max)}`;
  el.captions.sup.textContent = `suppression, scale ${scaleCaption(payload.map_sup.min, payload.map_sup.max)}`;
  el.captions.after.textContent = `after, scale ${scaleCaption(payload.map_after.min, payload.map_after.max)}`;
  el.scores.textContent = `score ${formatScorePair(payload.score_before, payload.score_after)}`;
  el.scores.classList.toggle('suppressed', payload.score_after <= payload.score_before);
}

async function runPreview(): Promise<void> {
  const result = submitPreview(state);
  state = result.state;
  showHint(state.hint);
  if (result.kind === 'blocked') return;

  previewAbort?.abort();
  previewAbort = new AbortController();
  const { requestId } = result;
  try {
    const payload = await api.preview(
      state.cls!,
      state.imageId!,
      state.draft,
      state.detector,
      previewAbort.signal,
    );
    state = resolvePreview(state, requestId, payload);
    if (state.payload === payload) {
      showError(null);
      history.add(state.cls!, state.draft);
      renderHistory();
      await renderPreview(payload);
    }
  } catch (err) {
    if (err instanceof DOMException && err.name === 'AbortError') return;
    state = failPreview(state, requestId, err instanceof Error ? err.message : String(err));
    showError(state.error);
  }
}

function renderReport(report: EvalReportPayload): void {
  const cell = document.createElement('div');
  cell.className = 'report-cell' + (isImprovement(report.delta) ? ' improvement' : '');
  cell.textContent = `${report.class}/${report.group}: ${report.cell}`;
  const detail = document.createElement('div');
  detail.className = 'report-detail';
  detail.textContent =
    `auroc_before=${report.auroc_before} auroc_after=${report.auroc_after} ` +
    `delta=${report.delta} over ${report.pairs.length} images`;
  el.reportView.replaceChildren(cell, detail);
}

async function runEvaluation(): Promise<void> {
  if (evalInFlight || !state.cls) return;
  const group = el.groupSelect.value;
  if (!group) return;
  evalInFlight = true;
  el.evalButton.disabled = true;
  try {
    const report = await api.evaluate(state.cls, group, state.detector);
    showError(null);
    renderReport(report);
  } catch (err) {
    // protocol errors (e.g. an all-normal scenario) are shown verbatim
    const message = err instanceof ApiError ? err.message : String(err);
    el.reportView.replaceChildren();
    showError(message);
  } finally {
    evalInFlight = false;
    el.evalButton.disabled = false;
  }
}

async function loadClass(cls: string): Promise<void> {
  const [images, groups] = await Promise.all([api.images(cls), api.groups(cls)]);
  el.imageSelect.replaceChildren(
    ...images.map((img) => {
      const opt = document.createElement('option');
      opt.value = img.id;
      opt.textContent = `${img.anomaly_type}: ${img.id.split('/').pop()}`;
      return opt;
    }),
  );
  el.groupSelect.replaceChildren(
    ...Object.keys(groups).map((g) => {
      const opt = document.createElement('option');
      opt.value = g;
      opt.textContent = g;
      return opt;
    }),
  );
  const first = images[0];
  if (first) state = selectImage(state, cls, first.id);
  renderHistory();
}

async function init(): Promise<void> {
  try {
    const classes = await api.classes();
    el.classSelect.replaceChildren(
      ...classes.map((c) => {
        const opt = document.createElement('option');
        opt.value = c;
        opt.textContent = c;
        return opt;
      }),
    );
    const firstClass = classes[0];
    if (firstClass) await loadClass(firstClass);
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
    return;
  }

  el.classSelect.addEventListener('change', () => void loadClass(el.classSelect.value));
  el.imageSelect.addEventListener('change', () => {
    state = selectImage(state, el.classSelect.value, el.imageSelect.value);
    if (state.draft.trim()) void runPreview();
  });
  el.detectorSelect.addEventListener('change', () => {
    state = setDetector(state, el.detectorSelect.value as DetectorKind);
  });
  el.normalityInput.addEventListener('input', () => {
    state = setDraft(state, el.normalityInput.value);
    showHint(null);
  });
  el.normalityInput.addEventListener('keydown', (ev) => {
    if (ev.key === 'Enter') void runPreview();
  });
  el.previewButton.addEventListener('click', () => void runPreview());
  el.opacity.addEventListener('change', () => {
    if (state.payload) void renderPreview(state.payload);
  });
  el.evalButton.addEventListener('click', () => void runEvaluation());
}

void init();
