import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: ["tests/e2e.setup.ts"],
    testTimeout: 30000,
    hookTimeout: 600000,
  },
});
