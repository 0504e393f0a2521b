import { ApiClient } from './api.js';
import { ExplorerApp } from './app.js';

function boot(): void {
  new ExplorerApp(document, new ApiClient('')).init();
}

if (document.readyState === 'loading') {
  document.addEventListener('DOMContentLoaded', boot);
} else {
  boot();
}
