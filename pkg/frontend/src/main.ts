/** Entry point: read the round id from the query string (?round=...) or a
 * picker form, then mount the dashboard.  Served by the annotation service
 * under /ui/, talking to the same origin. */

import { ApiClient } from './api.js';
import { MemoryStorage, RoundStore, type DraftStorage } from './state.js';
import { mountApp } from './ui.js';

function storage(): DraftStorage {
  try {
    window.localStorage.setItem('ptge-probe', '1');
    window.localStorage.removeItem('ptge-probe');
    return window.localStorage;
  } catch {
    return new MemoryStorage();
  }
}

function renderPicker(root: HTMLElement): void {
  root.textContent = '';
  const form = document.createElement('form');
  form.className = 'round-picker';
  const label = document.createElement('label');
  label.textContent = 'Round id: ';
  const input = document.createElement('input');
  input.name = 'round';
  input.placeholder = 'r0123abcd4567';
  const button = document.createElement('button');
  button.type = 'submit';
  button.textContent = 'Open';
  label.appendChild(input);
  form.append(label, button);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const id = input.value.trim();
    if (id) window.location.search = `?round=${encodeURIComponent(id)}`;
  });
  root.appendChild(form);
}

function boot(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const roundId = new URLSearchParams(window.location.search).get('round');
  if (!roundId) {
    renderPicker(root);
    return;
  }
  const api = new ApiClient('');
  const store = new RoundStore(api, roundId, storage());
  const app = mountApp(root, api, store, { annotator: 'ui-annotator' });
  void app.start();
}

boot();
