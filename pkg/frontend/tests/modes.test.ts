/**
 * The three modes against a store built from the default synthetic scenario:
 * each renders without error on fixture payloads byte-identical to the live
 * server's. Also covers the stale-response guard and boot-time failures.
 */

import { describe, expect, it } from 'vitest';
import { SeriesPayload } from '../src/api';
import { lineChart } from '../src/charts';
import { seriesColor } from '../src/scale';
import { banners, bootApp, settle } from './helpers';
import { fixtureJson } from './stub';

describe('mode rendering', () => {
  it('timeseries mode renders without error', async () => {
    const { root } = await bootApp({ regions: ['5:5', '0:0'], panel: 'series', res: 'day' });
    expect(banners(root)).toHaveLength(0);
    expect(root.querySelector('.grid-map')).not.toBeNull();
    expect(root.querySelectorAll('path.series').length).toBe(2);
    expect(root.querySelectorAll('.mode-tabs .tab')).toHaveLength(3);
  });

  it('clusters mode renders without error', async () => {
    const { root } = await bootApp({ mode: 'clusters', k: 5 });
    expect(banners(root)).toHaveLength(0);
    expect(root.querySelector('.grid-map')).not.toBeNull();
    expect(root.querySelectorAll('.legend-entry')).toHaveLength(5);
    expect(root.querySelector('.centroid-host svg.chart')).not.toBeNull();
  });

  it('density mode renders without error', async () => {
    const { root } = await bootApp({ mode: 'density', metric: 'volume' });
    expect(banners(root)).toHaveLength(0);
    expect(root.querySelector('.grid-map')).not.toBeNull();
    expect(root.querySelector('.density-legend')).not.toBeNull();
    expect(root.querySelectorAll('.grid-cell')).toHaveLength(100);
  });

  it('switching modes through the tabs keeps the app alive', async () => {
    const { root, app } = await bootApp({ regions: ['5:5'] });
    for (const mode of ['clusters', 'density', 'timeseries'] as const) {
      root
        .querySelector<HTMLElement>(`.mode-tabs [data-mode="${mode}"]`)!
        .dispatchEvent(new MouseEvent('click'));
      await settle();
      expect(app.state.mode).toBe(mode);
      expect(banners(root)).toHaveLength(0);
      expect(root.querySelector('.grid-map')).not.toBeNull();
    }
  });
});

describe('stale responses', () => {
  it('a slow fetch from an older view generation is discarded', async () => {
    const slowUrl = '/api/cities/synthtown/regions/5:5/series?type=CALLS&res=day';
    const { root, app, release } = await bootApp(
      { regions: [], panel: 'series', res: 'day' },
      { delay: [slowUrl] },
    );

    // first selection: its series fetch hangs
    app.update({ regions: ['5:5'] });
    await settle();
    const staleHost = root.querySelector<HTMLElement>('.chart-host')!;
    expect(staleHost.querySelector('svg.chart')).toBeNull();

    // second selection supersedes it and renders immediately
    app.update({ regions: ['0:0'] });
    await settle();
    const freshHost = root.querySelector<HTMLElement>('.chart-host')!;
    expect(freshHost.querySelector('svg.chart')).not.toBeNull();

    // now the slow response arrives; it must not touch the DOM
    release();
    await settle();
    expect(staleHost.querySelector('svg.chart')).toBeNull();

    // the visible chart still shows the fresh region's payload
    const fresh = fixtureJson<SeriesPayload>('series_0_0_CALLS_day.json');
    const scratch = document.createElement('div');
    lineChart(scratch, {
      series: [{ label: '0:0', color: seriesColor(0), values: fresh.values }],
      xLabels: { start: fresh.keys![0], end: fresh.keys![fresh.keys!.length - 1] },
    });
    expect(freshHost.querySelector('path.series')?.getAttribute('d')).toBe(
      scratch.querySelector('path.series')?.getAttribute('d'),
    );
  });
});

describe('failure handling', () => {
  it('an unreachable API at boot becomes a banner, not a crash', async () => {
    document.body.replaceChildren();
    const root = document.createElement('div');
    document.body.appendChild(root);
    const { App } = await import('../src/app');
    const app = new App(root, {
      fetchFn: () => Promise.reject(new Error('connection refused')),
      noHistory: true,
    });
    await app.start();
    const shown = banners(root);
    expect(shown).toHaveLength(1);
    expect(shown[0].getAttribute('data-code')).toBe('network_error');
  });

  it('an unknown region request surfaces the structured error', async () => {
    const { root } = await bootApp(
      { regions: ['nowhere'], panel: 'series', res: 'day' },
      {
        errors: {
          '/api/cities/synthtown/regions/nowhere/series?type=CALLS&res=day': {
            status: 404,
            body: { error: { code: 'region_not_found', message: "no region 'nowhere'" } },
          },
        },
      },
    );
    const shown = banners(root);
    expect(shown).toHaveLength(1);
    expect(shown[0].getAttribute('data-code')).toBe('region_not_found');
    expect(shown[0].textContent).toContain("no region 'nowhere'");
    // the view stays up with its empty state instead of crashing
    expect(root.querySelector('.hint')?.textContent).toContain('No data');
  });
});
