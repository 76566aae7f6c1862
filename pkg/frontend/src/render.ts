/**
 * Three.js scene mirroring a SceneModel: agent spheres with trails, the
 * migration point, the planned path in pink, goal ball, height-colored
 * voxel cubes (instanced, so thousands stay cheap), and the drag marker
 * with its force cue line back to the barycenter.
 */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { heightColor } from "./colors.js";
import { pathPolyline, Vec3 } from "./protocol.js";
import { barycenter, SceneModel } from "./sceneModel.js";

const AGENT_COLORS = [0x2f7de1, 0xe8a33d, 0x3fb77f, 0xd45d9e, 0x8a61d8];

function v3(p: Vec3): THREE.Vector3 {
  return new THREE.Vector3(p[0], p[1], p[2]);
}

class AgentVisual {
  mesh: THREE.Mesh;
  trail: THREE.Line;

  constructor(scene: THREE.Scene, id: number) {
    const color = AGENT_COLORS[id % AGENT_COLORS.length];
    this.mesh = new THREE.Mesh(
      new THREE.SphereGeometry(0.09, 18, 12),
      new THREE.MeshLambertMaterial({ color }));
    this.trail = new THREE.Line(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color, transparent: true, opacity: 0.5 }));
    this.trail.frustumCulled = false;
    scene.add(this.mesh, this.trail);
  }
}

export class Renderer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly controls: OrbitControls;
  readonly markerMesh: THREE.Mesh;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly agents = new Map<number, AgentVisual>();
  private readonly pcMesh: THREE.Mesh;
  private readonly pathLine: THREE.Line;
  private readonly markerLine: THREE.Line;
  private goalMesh: THREE.Mesh | null = null;
  private voxelMesh: THREE.InstancedMesh | null = null;
  private voxelsShown = -1;
  private voxelGeneration = -1;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene.background = new THREE.Color(0x10141c);

    // the sim is z-up; keep world coordinates and tilt the camera instead
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.01, 500);
    this.camera.up.set(0, 0, 1);
    this.camera.position.set(-4, -7, 5);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(2, 0, 1);

    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const sun = new THREE.DirectionalLight(0xffffff, 1.1);
    sun.position.set(3, -6, 10);
    this.scene.add(sun);
    const grid = new THREE.GridHelper(40, 40, 0x2c3244, 0x1d2230);
    grid.rotation.x = Math.PI / 2; // GridHelper is y-up by default
    this.scene.add(grid);

    this.pcMesh = new THREE.Mesh(
      new THREE.SphereGeometry(0.06, 14, 10),
      new THREE.MeshLambertMaterial({ color: 0xf5f5f5 }));
    this.scene.add(this.pcMesh);

    this.pathLine = new THREE.Line(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color: 0xff4fa3 })); // pink route
    this.pathLine.frustumCulled = false;
    this.scene.add(this.pathLine);

    this.markerMesh = new THREE.Mesh(
      new THREE.SphereGeometry(0.12, 18, 12),
      new THREE.MeshLambertMaterial({ color: 0xffc400, transparent: true,
                                      opacity: 0.9 }));
    this.markerMesh.visible = false;
    this.scene.add(this.markerMesh);

    this.markerLine = new THREE.Line(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color: 0xffc400 }));
    this.markerLine.frustumCulled = false;
    this.markerLine.visible = false;
    this.scene.add(this.markerLine);

    window.addEventListener("resize", () => this.resize());
    this.resize();
  }

  private resize(): void {
    const w = window.innerWidth;
    const h = window.innerHeight;
    this.renderer.setSize(w, h);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  update(m: SceneModel): void {
    for (const [id, view] of m.agents) {
      let vis = this.agents.get(id);
      if (!vis) {
        vis = new AgentVisual(this.scene, id);
        this.agents.set(id, vis);
      }
      vis.mesh.position.set(...view.p);
      vis.trail.geometry.setFromPoints(view.trail.map(v3));
    }
    for (const [id, vis] of this.agents) {
      if (!m.agents.has(id)) {
        this.scene.remove(vis.mesh, vis.trail);
        this.agents.delete(id);
      }
    }

    if (m.pc) this.pcMesh.position.set(...m.pc.p);
    this.pcMesh.visible = m.pc !== null;

    if (m.path) {
      this.pathLine.geometry.setFromPoints(pathPolyline(m.path).map(v3));
    }
    this.pathLine.visible = m.path !== null;

    if (m.goal && !this.goalMesh) {
      this.goalMesh = new THREE.Mesh(
        new THREE.SphereGeometry(1, 24, 16),
        new THREE.MeshBasicMaterial({ color: 0x3fb77f, transparent: true,
                                      opacity: 0.15 }));
      this.scene.add(this.goalMesh);
    }
    if (m.goal && this.goalMesh) {
      this.goalMesh.position.set(...m.goal.p);
      this.goalMesh.scale.setScalar(m.goal.tolerance);
    }

    this.syncVoxels(m);

    this.markerMesh.visible = m.controlOwned && m.marker !== null;
    this.markerLine.visible = this.markerMesh.visible;
    if (m.marker) {
      this.markerMesh.position.set(...m.marker);
      this.markerLine.geometry.setFromPoints(
        [v3(barycenter(m)), v3(m.marker)]);
    }
  }

  private syncVoxels(m: SceneModel): void {
    if (m.voxels.size === this.voxelsShown
        && m.generation === this.voxelGeneration) {
      return;
    }
    this.voxelsShown = m.voxels.size;
    this.voxelGeneration = m.generation;
    if (this.voxelMesh) {
      this.scene.remove(this.voxelMesh);
      this.voxelMesh.dispose();
      this.voxelMesh = null;
    }
    if (m.voxels.size === 0) return;

    const s = m.gridResolution;
    const mesh = new THREE.InstancedMesh(
      new THREE.BoxGeometry(s, s, s),
      new THREE.MeshLambertMaterial(),
      m.voxels.size);
    const mat = new THREE.Matrix4();
    const color = new THREE.Color();
    let i = 0;
    for (const center of m.voxels.values()) {
      mat.makeTranslation(center[0], center[1], center[2]);
      mesh.setMatrixAt(i, mat);
      const [r, g, b] = heightColor(center[2]);
      mesh.setColorAt(i, color.setRGB(r, g, b));
      i += 1;
    }
    mesh.instanceMatrix.needsUpdate = true;
    if (mesh.instanceColor) mesh.instanceColor.needsUpdate = true;
    this.voxelMesh = mesh;
    this.scene.add(mesh);
  }

  render(): void {
    this.controls.update();
    this.renderer.render(this.scene, this.camera);
  }
}
