import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Envelope, ErrorDoc } from "../src/api.js";

const HERE = dirname(fileURLToPath(import.meta.url));

export interface Recorded {
  status: number;
  body: string;
}

/** Load one recorded response ({status, body}) by fixture name. */
export function recorded(name: string): Recorded {
  const text = readFileSync(join(HERE, "fixtures", `${name}.json`), "utf-8");
  return JSON.parse(text) as Recorded;
}

/** Parse a 2xx fixture's body and return its payload. */
export function payload<T>(name: string): T {
  const fx = recorded(name);
  if (fx.status >= 300) throw new Error(`${name} is an error fixture (${fx.status})`);
  return (JSON.parse(fx.body) as Envelope<T>).payload;
}

/** Parse an error fixture's body into its error document. */
export function errorDoc(name: string): { status: number; doc: ErrorDoc } {
  const fx = recorded(name);
  return { status: fx.status, doc: JSON.parse(fx.body) as ErrorDoc };
}
