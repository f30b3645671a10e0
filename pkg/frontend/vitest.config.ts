import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the end-to-end test boots real services in child processes
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
