"""
Veritest Web API Launcher
Simple script to start the JSON server
"""
import sys
import os

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

print("Starting Veritest API server...")
print()

try:
    import config
    from api import app
except ImportError as e:
    print(f"Error importing modules: {e}")
    print("\nMake sure you have installed the required dependencies:")
    print("  pip install -r requirements.txt")
    sys.exit(1)

try:
    config.setup_logging()
    print(f"Serving on http://{config.WEB_HOST}:{config.WEB_PORT}/api")
    app.run(host=config.WEB_HOST, port=config.WEB_PORT, debug=False)
except Exception as e:
    print(f"Error starting server: {e}")
    print("\nTroubleshooting:")
    print(f"1. Check if another application is using port {config.WEB_PORT}")
    print("2. Set WEB_HOST/WEB_PORT in config.py")
    sys.exit(1)
