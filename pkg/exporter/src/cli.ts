#!/usr/bin/env node
import { exportManifest } from './export.js';

async function main(): Promise<number> {
  const [manifestPath, outDir] = process.argv.slice(2);
  if (!manifestPath || !outDir) {
    process.stderr.write('usage: oidt-export <manifest.json> <out-dir>\n');
    return 2;
  }
  try {
    const result = await exportManifest(manifestPath, outDir);
    process.stdout.write(
      JSON.stringify({ written: result.written.length, outDir }) + '\n',
    );
    return 0;
  } catch (e) {
    const err = e as Error;
    process.stderr.write(JSON.stringify({ error: err.name, message: err.message }) + '\n');
    return 3;
  }
}

main().then((code) => {
  process.exitCode = code;
});
