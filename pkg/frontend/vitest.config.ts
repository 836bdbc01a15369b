import { defineConfig } from "vitest/config";

// The e2e suite talks to a locally spawned session service; happy-dom
// enforces the same-origin policy, so the window origin must match it.
export const SERVICE_PORT = 8956;

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: {
        url: `http://127.0.0.1:${SERVICE_PORT}`,
      },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    fileParallelism: false,
  },
});
