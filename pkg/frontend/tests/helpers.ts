/** Boot the app against the stub API and drive it like a user would. */

import { App } from '../src/app';
import { ViewState } from '../src/state';
import { settle, stubApi, StubOptions } from './stub';

export interface TestApp {
  app: App;
  root: HTMLElement;
  release(): void;
}

export async function bootApp(
  patch: Partial<ViewState> = {},
  stubOptions: StubOptions = {},
): Promise<TestApp> {
  document.body.replaceChildren();
  const root = document.createElement('div');
  document.body.appendChild(root);
  const stub = stubApi(stubOptions);
  const app = new App(root, { fetchFn: stub.fetchFn, noHistory: true, basemapUrl: null });
  app.state = { ...app.state, city: 'synthtown', ...patch };
  await app.start();
  await settle();
  return { app, root, release: stub.release };
}

/** Move the chart keyboard cursor to sample index i (Home, then ArrowRight). */
export function hoverIndex(svg: SVGElement, i: number): void {
  svg.dispatchEvent(new KeyboardEvent('keydown', { key: 'Home' }));
  for (let step = 0; step < i; step++) {
    svg.dispatchEvent(new KeyboardEvent('keydown', { key: 'ArrowRight' }));
  }
}

export function tooltipRows(scope: HTMLElement): string[] {
  const tooltip = scope.querySelector<HTMLElement>('.chart-tooltip');
  if (!tooltip || tooltip.hidden) return [];
  return Array.from(tooltip.querySelectorAll('.tooltip-row')).map((el) => el.textContent ?? '');
}

export function tooltipKey(scope: HTMLElement): string {
  return scope.querySelector<HTMLElement>('.chart-tooltip .tooltip-key')?.textContent ?? '';
}

export function banners(root: HTMLElement): HTMLElement[] {
  return Array.from(root.querySelectorAll<HTMLElement>('.banner'));
}

export function cellPolygon(root: HTMLElement, regionId: string): SVGElement {
  const el = root.querySelector<SVGElement>(`.grid-cell[data-region="${regionId}"]`);
  if (!el) throw new Error(`no grid cell rendered for ${regionId}`);
  return el;
}

export { settle };
