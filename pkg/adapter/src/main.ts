import { parseArgs } from "node:util";

import { createApp } from "./server.js";
import { ALL_OPERATIONS, Operation } from "./schemas.js";

function parseEndpoints(raw: string | undefined): Operation[] | undefined {
  if (!raw) return undefined;
  const requested = raw.split(",").map((s) => s.trim()).filter(Boolean);
  for (const op of requested) {
    if (!ALL_OPERATIONS.includes(op as Operation)) {
      throw new Error(`unknown endpoint '${op}' (known: ${ALL_OPERATIONS.join(", ")})`);
    }
  }
  return requested as Operation[];
}

const { values } = parseArgs({
  options: {
    host: { type: "string", default: "127.0.0.1" },
    port: { type: "string", default: "8724" },
    token: { type: "string" },
    endpoints: { type: "string" },
  },
});

const app = createApp({
  endpoints: parseEndpoints(values.endpoints),
  token: values.token,
});
const port = Number(values.port);
app.listen(port, values.host as string, () => {
  console.log(`adapter listening on http://${values.host}:${port}`);
});
