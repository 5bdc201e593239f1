import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // the integration suite spawns a real server and replays sessions
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
