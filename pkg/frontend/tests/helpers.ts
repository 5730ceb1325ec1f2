// Spawns the real simulation service on a fixture run for integration tests.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));

export interface FixtureMeta {
  run_id: string;
  individuals: number;
  per_state: Record<string, number>;
}

export interface LiveService {
  baseUrl: string;
  meta: FixtureMeta;
  stop: () => void;
}

export async function startService(port: number): Promise<LiveService> {
  const target = mkdtempSync(join(tmpdir(), "pollsim-ui-"));
  const gen = spawnSync("python3", [join(HERE, "fixtures", "make_fixture_run.py"), target], {
    encoding: "utf-8",
  });
  if (gen.status !== 0) {
    throw new Error(`fixture generation failed: ${gen.stderr}`);
  }
  const meta = JSON.parse(readFileSync(join(target, "meta.json"), "utf-8")) as FixtureMeta;

  const server: ChildProcess = spawn(
    "python3",
    ["-m", "pollsim.cli", "serve", "--runs", join(target, "runs"), "--port", String(port)],
    { stdio: "ignore" },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/runs`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      server.kill();
      throw new Error("service did not come up within 30s");
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  return { baseUrl, meta, stop: () => server.kill() };
}
