import { boot } from './app';

declare global {
  interface Window {
    CITYPULSE_BASEMAP?: string;
  }
}

const root = document.getElementById('app');
if (root) {
  void boot(root, { basemapUrl: window.CITYPULSE_BASEMAP ?? null });
}
