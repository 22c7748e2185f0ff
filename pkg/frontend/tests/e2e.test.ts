/**
 * End-to-end UI loop against the real service on the synthetic fixture:
 * every preview yields three overlay payloads with score_after <=
 * score_before, and the group evaluation's numeric fields match the CLI's
 * structured report byte-for-byte.
 *
 * Requires the Python package on PATH (`python3 -c "import nandkit"`);
 * skipped otherwise. Run via `npm run test:e2e`.
 */

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import type { PreviewPayload } from '../src/types.js';

const PYTHON = process.env.NAND_PYTHON ?? 'python3';
const PORT = 8931 + (process.pid % 50);
const BASE = `http://127.0.0.1:${PORT}`;

function pythonAvailable(): boolean {
  try {
    execFileSync(PYTHON, ['-c', 'import nandkit'], { stdio: 'ignore' });
    return true;
  } catch {
    return false;
  }
}

const available = pythonAvailable();

function cli(args: string[], cwd: string): string {
  return execFileSync(PYTHON, ['-m', 'nandkit.cli', ...args], {
    cwd,
    encoding: 'utf-8',
  });
}

/** Pull the exact numeric literals for a key out of raw JSON text. */
function numericLiterals(text: string, key: string): string[] {
  const pattern = new RegExp(`"${key}":\\s*(-?[0-9][0-9eE+.-]*)`, 'g');
  const out: string[] = [];
  for (const match of text.matchAll(pattern)) {
    out.push(match[1]!);
  }
  return out;
}

describe.skipIf(!available)('editor loop against the live service', () => {
  let work: string;
  let server: ChildProcess;
  let cliReportText: string;

  beforeAll(async () => {
    work = mkdtempSync(join(tmpdir(), 'nand-e2e-'));
    cli(
      [
        'make-fixture',
        '--root', join(work, 'data'),
        '--cache', join(work, 'cache'),
        '--seed', '42',
        '--write-config', join(work, 'nand.cfg'),
      ],
      work,
    );
    cli(
      [
        '--config', join(work, 'nand.cfg'),
        'eval', '--class', 'widget', '--group', 'scuff', '--detector', 'zs',
        '--out', join(work, 'cli_report.json'),
      ],
      work,
    );
    cliReportText = readFileSync(join(work, 'cli_report.json'), 'utf-8');

    server = spawn(
      PYTHON,
      ['-m', 'nandkit.cli', '--config', join(work, 'nand.cfg'), 'serve', '--port', String(PORT)],
      { cwd: work, stdio: 'ignore' },
    );
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        const res = await fetch(`${BASE}/api/health`);
        if (res.ok) break;
      } catch {
        // not up yet
      }
      if (Date.now() > deadline) throw new Error('service did not come up');
      await new Promise((r) => setTimeout(r, 250));
    }
  }, 60_000);

  afterAll(() => {
    server?.kill();
    if (work) rmSync(work, { recursive: true, force: true });
  });

  it('lists the fixture class and groups', async () => {
    const classes = (await (await fetch(`${BASE}/api/classes`)).json()) as {
      classes: string[];
    };
    expect(classes.classes).toEqual(['widget']);
    const groups = (await (
      await fetch(`${BASE}/api/classes/widget/groups`)
    ).json()) as { groups: Record<string, string[]> };
    expect(Object.keys(groups.groups).sort()).toEqual(['dent', 'scuff']);
  });

  it(
    'every preview returns three overlays with score_after <= score_before',
    async () => {
      const images = (await (
        await fetch(`${BASE}/api/classes/widget/images?split=test`)
      ).json()) as { images: Array<{ id: string }> };
      expect(images.images.length).toBe(36);
      for (const { id } of images.images) {
        const res = await fetch(`${BASE}/api/preview`, {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify({
            class: 'widget',
            image_id: id,
            normality_text: 'scuff',
            detector: 'zs',
          }),
        });
        expect(res.ok).toBe(true);
        const payload = (await res.json()) as PreviewPayload;
        expect(payload.score_after).toBeLessThanOrEqual(payload.score_before);
        for (const map of [payload.map_before, payload.map_sup, payload.map_after]) {
          expect(map.png_base64.length).toBeGreaterThan(0);
          expect(map.height).toBeGreaterThan(0);
          expect(map.width).toBeGreaterThan(0);
          expect(map.max).toBeGreaterThanOrEqual(map.min);
        }
      }
    },
    120_000,
  );

  it('group evaluation matches the CLI structured file byte-for-byte on numeric fields', async () => {
    const res = await fetch(`${BASE}/api/evaluate`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ class: 'widget', group: 'scuff', detector: 'zs' }),
    });
    expect(res.ok).toBe(true);
    const apiText = await res.text();
    for (const key of ['auroc_before', 'auroc_after', 'delta', 'score_before', 'score_after']) {
      const fromApi = numericLiterals(apiText, key);
      const fromCli = numericLiterals(cliReportText, key);
      expect(fromApi.length).toBeGreaterThan(0);
      expect(fromApi).toEqual(fromCli);
    }
    const report = JSON.parse(apiText) as { cell: string; delta: number };
    expect(report.delta).toBeGreaterThan(0.3);
    expect(report.cell).toContain('→');
  }, 60_000);

  it('surfaces protocol errors verbatim for bad groups', async () => {
    const res = await fetch(`${BASE}/api/evaluate`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ class: 'widget', group: 'missing', detector: 'zs' }),
    });
    expect(res.status).toBe(404);
    const body = (await res.json()) as { detail: string };
    expect(body.detail).toContain('missing');
  });
});
