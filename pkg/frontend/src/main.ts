import { createApi } from './api.js';
import { TriageApp } from './app.js';

const params = new URLSearchParams(window.location.search);
const annotator = params.get('annotator') ?? 'anonymous';
const base = params.get('api') ?? '';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app container');
void new TriageApp(createApi(base), root, annotator).start();
