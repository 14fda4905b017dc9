import { mount } from "./ui.js";

mount("app", "");
