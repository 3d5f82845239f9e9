import { bootstrapFromLocation } from "./app.js";

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrapFromLocation();
}
